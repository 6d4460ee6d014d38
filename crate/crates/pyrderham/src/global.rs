//! Global DOF numbering with orientation signs, global interpolation onto
//! the four conforming spaces, inter-element conformity checks and global
//! exactness/commuting verification.
//!
//! Sign conventions: every global edge is oriented from its lower to its
//! higher vertex id; an element's local edge DOF enters with sign `+1` when
//! the local orientation agrees. Every interior face is owned by the
//! adjacent element with the smaller index and globally oriented by the
//! owner's outward normal, so the owner contributes with `+1` and the
//! neighbour with `-1`. The pyramid cell DOF and all L² DOFs are
//! element-private. Shared DOFs are evaluated once, through the owner's
//! pullback.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::dof::{dof_set, local_faces, DofQuadrature, RefScalarField, RefVectorField};
use crate::femspace::{derivative_matrix_cached, FieldFn, LocalInterpolant};
use crate::mesh::ThpMesh;
use crate::refbasis::{SpaceKind, Value};
use crate::refgeom::{ElemKind, ElementMap};
use crate::{Error, Point3, Result, Vec3};

/// Adjacency of one mesh face.
#[derive(Clone, Debug)]
pub struct FaceInfo {
    /// sorted global vertex ids
    pub key: Vec<usize>,
    /// `(element, local face index)`, ascending element index; the first
    /// entry is the owner
    pub sides: Vec<(usize, usize)>,
}

/// Global numbering of one space on a mesh.
#[derive(Clone, Debug)]
pub struct GlobalDofMap {
    pub space: SpaceKind,
    pub n_dofs: usize,
    /// per element: local DOF index to `(global index, sign)`
    pub element_dofs: Vec<Vec<(usize, f64)>>,
    /// face adjacency (for conformity checks and ownership)
    pub faces: Vec<FaceInfo>,
}

/// Build the deterministic global numbering of `space` on `mesh`
/// (vertices, then edges by sorted endpoint ids, then faces by sorted key,
/// then element-private cell DOFs in element order).
pub fn build_dof_map(mesh: &ThpMesh, space: SpaceKind) -> Result<GlobalDofMap> {
    let report = mesh.validate();
    if !report.is_valid() {
        return Err(Error::InvalidMesh(report.to_string()));
    }
    let face_table = mesh.face_table();
    let faces: Vec<FaceInfo> = face_table
        .iter()
        .map(|(key, sides)| FaceInfo {
            key: key.clone(),
            sides: sides.clone(),
        })
        .collect();

    let mut element_dofs: Vec<Vec<(usize, f64)>> = Vec::with_capacity(mesh.elements.len());
    let n_dofs;
    match space {
        SpaceKind::H1 => {
            for e in &mesh.elements {
                element_dofs.push(e.nodes.iter().map(|&v| (v, 1.0)).collect());
            }
            n_dofs = mesh.vertices.len();
        }
        SpaceKind::HCurl => {
            let edge_ids: BTreeMap<(usize, usize), usize> = mesh
                .edge_set()
                .into_iter()
                .enumerate()
                .map(|(i, e)| (e, i))
                .collect();
            for e in &mesh.elements {
                let mut dofs = Vec::new();
                for &(a, b) in crate::dof::local_edges(e.kind) {
                    let (ga, gb) = (e.nodes[a], e.nodes[b]);
                    let key = (ga.min(gb), ga.max(gb));
                    let sign = if ga < gb { 1.0 } else { -1.0 };
                    dofs.push((edge_ids[&key], sign));
                }
                element_dofs.push(dofs);
            }
            n_dofs = edge_ids.len();
        }
        SpaceKind::HDiv => {
            let face_ids: BTreeMap<&[usize], usize> = faces
                .iter()
                .enumerate()
                .map(|(i, f)| (f.key.as_slice(), i))
                .collect();
            let mut next = faces.len();
            for (ei, e) in mesh.elements.iter().enumerate() {
                let mut dofs = Vec::new();
                for corners in local_faces(e.kind) {
                    let mut key: Vec<usize> = corners.iter().map(|&c| e.nodes[c]).collect();
                    key.sort_unstable();
                    let fid = face_ids[key.as_slice()];
                    let owner = faces[fid].sides[0].0;
                    let sign = if owner == ei { 1.0 } else { -1.0 };
                    dofs.push((fid, sign));
                }
                if e.kind == ElemKind::Pyramid {
                    dofs.push((next, 1.0));
                    next += 1;
                }
                element_dofs.push(dofs);
            }
            n_dofs = next;
        }
        SpaceKind::L2 => {
            let mut next = 0;
            for e in &mesh.elements {
                let count = space.dimension(e.kind);
                element_dofs.push((0..count).map(|k| (next + k, 1.0)).collect());
                next += count;
            }
            n_dofs = next;
        }
    }
    Ok(GlobalDofMap {
        space,
        n_dofs,
        element_dofs,
        faces,
    })
}

/// A coefficient vector over the global DOFs of a space.
#[derive(Clone, Debug)]
pub struct GlobalField {
    pub space: SpaceKind,
    pub coefficients: Vec<f64>,
}

impl GlobalField {
    /// Element restriction as a local interpolant (`local = sign * global`).
    pub fn restrict(&self, mesh: &ThpMesh, map: &GlobalDofMap, elem: usize) -> LocalInterpolant {
        let coeffs = map.element_dofs[elem]
            .iter()
            .map(|&(g, s)| s * self.coefficients[g])
            .collect();
        LocalInterpolant::from_coefficients(self.space, mesh.element_map(elem), coeffs)
    }
}

/// A field evaluable per element at matched reference/physical points.
/// Analytic fields ignore the element and reference point; discrete fields
/// evaluate through their element restriction so no inverse mapping is
/// needed.
pub trait MeshField: Sync {
    fn is_vector(&self) -> bool;
    fn eval(&self, elem: usize, ref_p: &Point3, phys_p: &Point3) -> Value;
    /// physical divergence, when available (pyramid cell DOFs use it via
    /// the Piola identity)
    fn divergence(&self, _elem: usize, _ref_p: &Point3, _phys_p: &Point3) -> Option<f64> {
        None
    }
}

impl MeshField for FieldFn {
    fn is_vector(&self) -> bool {
        matches!(self, FieldFn::Vector(_))
    }

    fn eval(&self, _elem: usize, _ref_p: &Point3, phys_p: &Point3) -> Value {
        FieldFn::eval(self, phys_p)
    }

    fn divergence(&self, _elem: usize, _ref_p: &Point3, phys_p: &Point3) -> Option<f64> {
        match self {
            FieldFn::Vector(v) => v.divergence.as_ref().map(|d| d(phys_p)),
            FieldFn::Scalar(_) => None,
        }
    }
}

/// View of a [`GlobalField`] as a [`MeshField`], for re-interpolation.
pub struct GlobalFieldView<'a> {
    pub mesh: &'a ThpMesh,
    pub map: &'a GlobalDofMap,
    pub field: &'a GlobalField,
}

impl MeshField for GlobalFieldView<'_> {
    fn is_vector(&self) -> bool {
        self.field.space.is_vector_valued()
    }

    fn eval(&self, elem: usize, ref_p: &Point3, _phys_p: &Point3) -> Value {
        self.field
            .restrict(self.mesh, self.map, elem)
            .eval(ref_p)
            .expect("evaluation inside a valid element")
    }

    fn divergence(&self, elem: usize, ref_p: &Point3, _phys_p: &Point3) -> Option<f64> {
        if self.field.space != SpaceKind::HDiv {
            return None;
        }
        Some(
            self.field
                .restrict(self.mesh, self.map, elem)
                .eval_derivative(ref_p)
                .expect("divergence inside a valid element")
                .scalar(),
        )
    }
}

struct PulledMeshScalar<'a> {
    space: SpaceKind,
    elem: usize,
    map: &'a ElementMap,
    field: &'a dyn MeshField,
}

impl RefScalarField for PulledMeshScalar<'_> {
    fn eval(&self, p: &Point3) -> f64 {
        let x = self.map.map_point(p);
        let v = self.field.eval(self.elem, p, &x).scalar();
        match self.space {
            SpaceKind::H1 => v,
            SpaceKind::L2 => self.map.jacobian_unchecked(p).1 * v,
            _ => unreachable!(),
        }
    }
}

struct PulledMeshVector<'a> {
    space: SpaceKind,
    elem: usize,
    map: &'a ElementMap,
    field: &'a dyn MeshField,
}

impl RefVectorField for PulledMeshVector<'_> {
    fn eval(&self, p: &Point3) -> Vec3 {
        let x = self.map.map_point(p);
        let v = self.field.eval(self.elem, p, &x).vector();
        let (f, j) = self.map.jacobian_unchecked(p);
        match self.space {
            SpaceKind::HCurl => f.transpose() * v,
            SpaceKind::HDiv => f.try_inverse().expect("valid element") * v * j,
            _ => unreachable!(),
        }
    }

    fn divergence(&self, p: &Point3) -> f64 {
        let x = self.map.map_point(p);
        match self.field.divergence(self.elem, p, &x) {
            Some(d) => self.map.jacobian_unchecked(p).1 * d,
            None => crate::dof::fd_divergence(self, p),
        }
    }
}

/// Local DOF values of a mesh field on one element.
fn local_dof_values(
    mesh: &ThpMesh,
    space: SpaceKind,
    elem: usize,
    field: &dyn MeshField,
    q: &DofQuadrature,
) -> Result<Vec<f64>> {
    let map = mesh.element_map(elem);
    let dofs = dof_set(space, map.kind());
    if space.is_vector_valued() {
        if !field.is_vector() {
            return Err(Error::ArityMismatch);
        }
        let pulled = PulledMeshVector {
            space,
            elem,
            map: &map,
            field,
        };
        dofs.apply_vector(&pulled, q)
    } else {
        if field.is_vector() {
            return Err(Error::ArityMismatch);
        }
        let pulled = PulledMeshScalar {
            space,
            elem,
            map: &map,
            field,
        };
        dofs.apply_scalar(&pulled, q)
    }
}

/// Global nodal interpolation: every global DOF is evaluated once, through
/// its owner element.
pub fn interpolate_global(
    mesh: &ThpMesh,
    map: &GlobalDofMap,
    field: &dyn MeshField,
    q: &DofQuadrature,
) -> Result<GlobalField> {
    let mut coefficients = vec![f64::NAN; map.n_dofs];
    let mut set = vec![false; map.n_dofs];
    for elem in 0..mesh.elements.len() {
        if map.element_dofs[elem].iter().all(|&(g, _)| set[g]) {
            continue;
        }
        let local = local_dof_values(mesh, map.space, elem, field, q)?;
        for (&(g, sign), value) in map.element_dofs[elem].iter().zip(local) {
            if !set[g] {
                coefficients[g] = sign * value;
                set[g] = true;
            }
        }
    }
    debug_assert!(set.iter().all(|&s| s));
    Ok(GlobalField {
        space: map.space,
        coefficients,
    })
}

/// Per-face jump diagnostics of a global field.
#[derive(Clone, Debug, Default)]
pub struct JumpReport {
    /// `(face key, max sampled jump)` per interior face
    pub faces: Vec<(Vec<usize>, f64)>,
    pub max_jump: f64,
}

/// Deterministic interior sample weights for a triangle (barycentric).
fn tri_samples(n_per_side: usize) -> Vec<[f64; 3]> {
    let mut out = Vec::new();
    let n = n_per_side as f64;
    for i in 0..n_per_side {
        for j in 0..n_per_side - i {
            let a = (i as f64 + 0.4) / (n + 1.0);
            let b = (j as f64 + 0.4) / (n + 1.0);
            out.push([1.0 - a - b, a, b]);
        }
    }
    out
}

fn quad_samples(n_per_side: usize) -> Vec<[f64; 2]> {
    let mut out = Vec::new();
    for i in 0..n_per_side {
        for j in 0..n_per_side {
            out.push([
                (i as f64 + 0.5) / n_per_side as f64,
                (j as f64 + 0.5) / n_per_side as f64,
            ]);
        }
    }
    out
}

/// Check inter-element continuity of a global field: value jumps for H¹,
/// tangential jumps for H(curl), normal jumps for H(div), sampled at 25
/// points per interior face. L² fields report nothing.
pub fn check_conformity(mesh: &ThpMesh, map: &GlobalDofMap, field: &GlobalField) -> JumpReport {
    if field.space == SpaceKind::L2 {
        return JumpReport::default();
    }
    let mut report = JumpReport::default();
    for face in &map.faces {
        if face.sides.len() != 2 {
            continue;
        }
        let mut max_jump = 0.0f64;
        // canonical corner order: the owner's local cyclic order, as
        // global ids
        let (owner_elem, owner_lf) = face.sides[0];
        let owner = &mesh.elements[owner_elem];
        let owner_corners: Vec<usize> = local_faces(owner.kind)[owner_lf]
            .iter()
            .map(|&c| owner.nodes[c])
            .collect();

        // per side: reference corner points matched to the canonical order
        let side_ref_corners: Vec<(usize, Vec<Point3>)> = face
            .sides
            .iter()
            .map(|&(elem, lf)| {
                let e = &mesh.elements[elem];
                let ref_verts = e.kind.reference_vertices();
                let locals = &local_faces(e.kind)[lf];
                let pts = owner_corners
                    .iter()
                    .map(|gid| {
                        let lc = locals
                            .iter()
                            .find(|&&c| e.nodes[c] == *gid)
                            .expect("conforming face shares vertex ids");
                        ref_verts[*lc]
                    })
                    .collect();
                (elem, pts)
            })
            .collect();

        let weight_sets: Vec<Vec<f64>> = if owner_corners.len() == 3 {
            tri_samples(6).into_iter().map(|w| w.to_vec()).collect()
        } else {
            quad_samples(5)
                .into_iter()
                .map(|[u, v]| vec![(1.0 - u) * (1.0 - v), u * (1.0 - v), u * v, (1.0 - u) * v])
                .collect()
        };

        // face geometry from the owner's physical corners
        let phys_corners: Vec<Point3> = owner_corners.iter().map(|&g| mesh.vertices[g]).collect();

        for weights in weight_sets.iter().take(25) {
            // physical tangent plane at the sample
            let (t1, t2) = if phys_corners.len() == 3 {
                (phys_corners[1] - phys_corners[0], phys_corners[2] - phys_corners[0])
            } else {
                // derivatives of the bilinear patch
                let [w0, w1, w2, w3] = [weights[0], weights[1], weights[2], weights[3]];
                let (u, v) = (w1 + w2, w2 + w3);
                let du = (phys_corners[1] - phys_corners[0]) * (1.0 - v)
                    + (phys_corners[2] - phys_corners[3]) * v;
                let dv = (phys_corners[3] - phys_corners[0]) * (1.0 - u)
                    + (phys_corners[2] - phys_corners[1]) * u;
                let _ = w0;
                (du, dv)
            };
            let normal = t1.cross(&t2).normalize();

            let mut values = Vec::new();
            let mut phys_points = Vec::new();
            for (elem, ref_corners) in &side_ref_corners {
                let mut ref_p = Vec3::zeros();
                for (w, c) in weights.iter().zip(ref_corners) {
                    ref_p += c.coords * *w;
                }
                let ref_p = Point3::from(ref_p);
                let local = field.restrict(mesh, map, *elem);
                values.push(local.eval(&ref_p).expect("valid element"));
                phys_points.push(mesh.element_map(*elem).map_point(&ref_p));
            }
            // both sides must sample the same physical point
            debug_assert!((phys_points[0] - phys_points[1]).norm() <= 1e-12);

            let jump = match (field.space, values[0], values[1]) {
                (SpaceKind::H1, Value::Scalar(a), Value::Scalar(b)) => (a - b).abs(),
                (SpaceKind::HCurl, Value::Vector(a), Value::Vector(b)) => {
                    let d = a - b;
                    (d - normal * d.dot(&normal)).norm()
                }
                (SpaceKind::HDiv, Value::Vector(a), Value::Vector(b)) => (a - b).dot(&normal).abs(),
                _ => unreachable!(),
            };
            max_jump = max_jump.max(jump);
        }
        report.max_jump = report.max_jump.max(max_jump);
        report.faces.push((face.key.clone(), max_jump));
    }
    report
}

/// The assembled global derivative matrix from `from_map` into `to_map`
/// (dense; intended for desk-scale meshes).
pub fn global_derivative_matrix(
    mesh: &ThpMesh,
    from_map: &GlobalDofMap,
    to_map: &GlobalDofMap,
) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(to_map.n_dofs, from_map.n_dofs);
    let mut written = vec![false; to_map.n_dofs];
    for elem in 0..mesh.elements.len() {
        let kind = mesh.elements[elem].kind;
        let local = &derivative_matrix_cached(from_map.space, kind).matrix;
        for (i, &(gt, st)) in to_map.element_dofs[elem].iter().enumerate() {
            if written[gt] {
                continue;
            }
            written[gt] = true;
            for (j, &(gf, sf)) in from_map.element_dofs[elem].iter().enumerate() {
                out[(gt, gf)] += st * local[(i, j)] * sf;
            }
        }
    }
    out
}

/// Apply the discrete differential operator to a global field.
pub fn global_derivative(
    mesh: &ThpMesh,
    from_map: &GlobalDofMap,
    to_map: &GlobalDofMap,
    field: &GlobalField,
) -> Result<GlobalField> {
    if field.space != from_map.space || from_map.space.next() != Some(to_map.space) {
        return Err(Error::ArityMismatch);
    }
    let mut coefficients = vec![0.0; to_map.n_dofs];
    let mut written = vec![false; to_map.n_dofs];
    for elem in 0..mesh.elements.len() {
        let kind = mesh.elements[elem].kind;
        let local = &derivative_matrix_cached(from_map.space, kind).matrix;
        for (i, &(gt, st)) in to_map.element_dofs[elem].iter().enumerate() {
            if written[gt] {
                continue;
            }
            written[gt] = true;
            let mut acc = 0.0;
            for (j, &(gf, sf)) in from_map.element_dofs[elem].iter().enumerate() {
                acc += local[(i, j)] * sf * field.coefficients[gf];
            }
            coefficients[gt] = st * acc;
        }
    }
    Ok(GlobalField {
        space: to_map.space,
        coefficients,
    })
}
