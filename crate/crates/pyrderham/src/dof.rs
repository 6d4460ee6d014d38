//! Degree-of-freedom functionals on the reference elements.
//!
//! Every (space, element-kind) pair carries the functionals dual to its
//! basis: vertex evaluations for H¹, signed tangential edge integrals for
//! H(curl), outward face fluxes (plus one signed cell moment on pyramids)
//! for H(div), and cell integrals / sub-tet moment pairs for L².
//!
//! Edges are oriented from the lower to the higher local vertex number.
//! Face normals are outward. Integrals are evaluated on the reference
//! element (physical DOFs are defined purely by pullback), with the edge
//! parametrization Jacobian included via the unnormalized tangent.

use crate::quadrature::{rule_for, subtet_rule, Domain, QuadRule};
use crate::refbasis::{
    ShapeFunction, SpaceKind, BasisSet, HEX_EDGES, HEX_FACES, PYR_BASE, PYR_EDGES, PYR_TRI_FACES,
    TET_EDGES, TET_FACES,
};
use crate::refgeom::{ElemKind, SubTetId};
use crate::{Error, Point3, Result, Vec3};
use nalgebra::DMatrix;

/// Scalar-valued reference-domain field.
pub trait RefScalarField {
    fn eval(&self, p: &Point3) -> f64;
}

impl<F: Fn(&Point3) -> f64> RefScalarField for F {
    fn eval(&self, p: &Point3) -> f64 {
        self(p)
    }
}

/// Finite-difference step used when a black-box field supplies no
/// divergence evaluator (documented accuracy ~1e-6).
pub const FD_STEP: f64 = 1e-6;

/// Vector-valued reference-domain field. The divergence defaults to central
/// finite differences; fields with an analytic divergence should override.
pub trait RefVectorField {
    fn eval(&self, p: &Point3) -> Vec3;

    fn divergence(&self, p: &Point3) -> f64 {
        fd_divergence(self, p)
    }
}

/// Central finite-difference divergence with step [`FD_STEP`].
pub fn fd_divergence<F: RefVectorField + ?Sized>(f: &F, p: &Point3) -> f64 {
    let mut d = 0.0;
    for axis in 0..3 {
        let mut hi = *p;
        let mut lo = *p;
        hi[axis] += FD_STEP;
        lo[axis] -= FD_STEP;
        d += (f.eval(&hi)[axis] - f.eval(&lo)[axis]) / (2.0 * FD_STEP);
    }
    d
}

impl<F: Fn(&Point3) -> Vec3> RefVectorField for F {
    fn eval(&self, p: &Point3) -> Vec3 {
        self(p)
    }
}

/// Pairs a vector evaluator with an analytic divergence evaluator.
pub struct VectorFieldWithDiv<F, G> {
    pub value: F,
    pub div: G,
}

impl<F: Fn(&Point3) -> Vec3, G: Fn(&Point3) -> f64> RefVectorField for VectorFieldWithDiv<F, G> {
    fn eval(&self, p: &Point3) -> Vec3 {
        (self.value)(p)
    }

    fn divergence(&self, p: &Point3) -> f64 {
        (self.div)(p)
    }
}

/// View of a shape function as a DOF-applicable field, with analytic
/// divergence for H(div) shapes.
pub struct ShapeField<'a>(pub &'a ShapeFunction);

impl RefScalarField for ShapeField<'_> {
    fn eval(&self, p: &Point3) -> f64 {
        self.0.scalar_at(p)
    }
}

impl RefVectorField for ShapeField<'_> {
    fn eval(&self, p: &Point3) -> Vec3 {
        self.0.vector_at(p)
    }

    fn divergence(&self, p: &Point3) -> f64 {
        self.0
            .divergence_at(p)
            .expect("divergence requested from a non-H(div) shape")
    }
}

/// Either arity of field, for the generic [`DofFunctional::apply`] entry.
pub enum FieldRef<'a> {
    Scalar(&'a dyn RefScalarField),
    Vector(&'a dyn RefVectorField),
}

/// Geometric carrier and action of one functional.
#[derive(Clone, Debug, PartialEq)]
pub enum DofKind {
    /// point evaluation at a reference vertex
    VertexEval { vertex: usize },
    /// signed tangential integral over the oriented reference edge
    EdgeTangential { tail: usize, head: usize },
    /// total outward normal flux over a reference face
    FaceFlux { corners: Vec<usize> },
    /// integral over the whole reference cell
    CellIntegral,
    /// integral over T1 plus integral over T2
    CellMomentSum,
    /// integral over T1 minus integral over T2
    CellMomentDiff,
    /// divergence integral over T1 minus divergence integral over T2
    SignedDivDiff,
}

/// One degree of freedom of a (space, element-kind) pair.
#[derive(Clone, Debug)]
pub struct DofFunctional {
    pub kind: DofKind,
    pub elem: ElemKind,
    pub index: usize,
}

/// Quadrature degrees used to evaluate DOF integrals.
#[derive(Clone, Copy, Debug)]
pub struct DofQuadrature {
    pub edge_degree: usize,
    pub face_degree: usize,
    pub cell_degree: usize,
}

impl Default for DofQuadrature {
    fn default() -> Self {
        Self {
            edge_degree: 4,
            face_degree: 4,
            cell_degree: 4,
        }
    }
}

impl DofQuadrature {
    pub fn with_degree(degree: usize) -> Self {
        Self {
            edge_degree: degree,
            face_degree: degree,
            cell_degree: degree,
        }
    }
}

impl DofFunctional {
    pub fn apply(&self, field: FieldRef, q: &DofQuadrature) -> Result<f64> {
        match field {
            FieldRef::Scalar(f) => self.apply_scalar(f, q),
            FieldRef::Vector(f) => self.apply_vector(f, q),
        }
    }

    pub fn apply_scalar(&self, f: &dyn RefScalarField, q: &DofQuadrature) -> Result<f64> {
        let verts = self.elem.reference_vertices();
        match &self.kind {
            DofKind::VertexEval { vertex } => Ok(f.eval(&verts[*vertex])),
            DofKind::CellIntegral => {
                let domain = match self.elem {
                    ElemKind::Tet => Domain::Tet,
                    ElemKind::Hex => Domain::Hex,
                    ElemKind::Pyramid => Domain::Pyramid,
                };
                Ok(rule_for(domain, q.cell_degree)?.integrate(|p| f.eval(p)))
            }
            DofKind::CellMomentSum => Ok(self.subtet_integral(SubTetId::T1, f, q)
                + self.subtet_integral(SubTetId::T2, f, q)),
            DofKind::CellMomentDiff => Ok(self.subtet_integral(SubTetId::T1, f, q)
                - self.subtet_integral(SubTetId::T2, f, q)),
            _ => Err(Error::ArityMismatch),
        }
    }

    fn subtet_integral(&self, sub: SubTetId, f: &dyn RefScalarField, q: &DofQuadrature) -> f64 {
        subtet_rule(sub, q.cell_degree).integrate(|p| f.eval(p))
    }

    pub fn apply_vector(&self, f: &dyn RefVectorField, q: &DofQuadrature) -> Result<f64> {
        let verts = self.elem.reference_vertices();
        match &self.kind {
            DofKind::EdgeTangential { tail, head } => {
                let a = verts[*tail];
                let b = verts[*head];
                let t = b - a;
                let rule = rule_for(Domain::Segment, q.edge_degree)?;
                Ok(rule.integrate(|s| f.eval(&(a + t * s.x)).dot(&t)))
            }
            DofKind::FaceFlux { corners } => self.face_flux(corners, f, q),
            DofKind::SignedDivDiff => {
                let int = |sub| {
                    subtet_rule(sub, q.cell_degree).integrate(|p| f.divergence(p))
                };
                Ok(int(SubTetId::T1) - int(SubTetId::T2))
            }
            _ => Err(Error::ArityMismatch),
        }
    }

    fn face_flux(&self, corners: &[usize], f: &dyn RefVectorField, q: &DofQuadrature) -> Result<f64> {
        let verts = self.elem.reference_vertices();
        let centroid = {
            let mut c = Vec3::zeros();
            for v in &verts {
                c += v.coords;
            }
            Point3::from(c / verts.len() as f64)
        };
        match corners.len() {
            3 => {
                let t = orient_tri([verts[corners[0]], verts[corners[1]], verts[corners[2]]], &centroid);
                Ok(tri_flux(&t, f, &rule_for(Domain::Triangle, q.face_degree)?))
            }
            4 => {
                let c: Vec<Point3> = corners.iter().map(|&i| verts[i]).collect();
                let c = orient_quad([c[0], c[1], c[2], c[3]], &centroid);
                if self.elem == ElemKind::Pyramid {
                    // The base carries piecewise fields; integrate each half
                    // so the rule stays exact across the diagonal.
                    let rule = rule_for(Domain::Triangle, q.face_degree)?;
                    Ok(tri_flux(&[c[0], c[1], c[2]], f, &rule)
                        + tri_flux(&[c[0], c[2], c[3]], f, &rule))
                } else {
                    let rule = rule_for(Domain::Quad, q.face_degree)?;
                    Ok(rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(p, w)| {
                            let (u, v) = (p.x, p.y);
                            let pos = c[0].coords * ((1.0 - u) * (1.0 - v))
                                + c[1].coords * (u * (1.0 - v))
                                + c[2].coords * (u * v)
                                + c[3].coords * ((1.0 - u) * v);
                            let du = (c[1] - c[0]) * (1.0 - v) + (c[2] - c[3]) * v;
                            let dv = (c[3] - c[0]) * (1.0 - u) + (c[2] - c[1]) * u;
                            w * f.eval(&Point3::from(pos)).dot(&du.cross(&dv))
                        })
                        .sum())
                }
            }
            n => {
                debug_assert!(false, "face with {n} corners");
                Err(Error::ArityMismatch)
            }
        }
    }
}

fn orient_tri(t: [Point3; 3], elem_centroid: &Point3) -> [Point3; 3] {
    let n = (t[1] - t[0]).cross(&(t[2] - t[0]));
    let fc = Point3::from((t[0].coords + t[1].coords + t[2].coords) / 3.0);
    if n.dot(&(fc - elem_centroid)) >= 0.0 {
        t
    } else {
        [t[0], t[2], t[1]]
    }
}

fn orient_quad(c: [Point3; 4], elem_centroid: &Point3) -> [Point3; 4] {
    let n = (c[1] - c[0]).cross(&(c[3] - c[0]));
    let fc = Point3::from((c[0].coords + c[1].coords + c[2].coords + c[3].coords) / 4.0);
    if n.dot(&(fc - elem_centroid)) >= 0.0 {
        c
    } else {
        [c[0], c[3], c[2], c[1]]
    }
}

fn tri_flux(t: &[Point3; 3], f: &dyn RefVectorField, rule: &QuadRule) -> f64 {
    // flux = integral over the unit triangle of v(P(u,w)) . N with
    // N = (t1 - t0) x (t2 - t0); the rule weights carry the 1/2 measure.
    let (ea, eb) = (t[1] - t[0], t[2] - t[0]);
    let n = ea.cross(&eb);
    rule.points
        .iter()
        .zip(&rule.weights)
        .map(|(p, w)| {
            let pos = t[0] + ea * p.x + eb * p.y;
            w * f.eval(&pos).dot(&n)
        })
        .sum::<f64>()
}

/// The ordered DOF functionals of a space on an element kind.
#[derive(Clone, Debug)]
pub struct DofSet {
    pub space: SpaceKind,
    pub elem: ElemKind,
    pub functionals: Vec<DofFunctional>,
}

impl DofSet {
    pub fn len(&self) -> usize {
        self.functionals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functionals.is_empty()
    }

    pub fn apply_scalar(&self, f: &dyn RefScalarField, q: &DofQuadrature) -> Result<Vec<f64>> {
        self.functionals.iter().map(|n| n.apply_scalar(f, q)).collect()
    }

    pub fn apply_vector(&self, f: &dyn RefVectorField, q: &DofQuadrature) -> Result<Vec<f64>> {
        self.functionals.iter().map(|n| n.apply_vector(f, q)).collect()
    }

    /// The DOF-by-basis matrix `N_i(shape_j)`; unisolvence makes it the
    /// identity.
    pub fn matrix(&self, basis: &BasisSet, q: &DofQuadrature) -> Result<DMatrix<f64>> {
        let n = self.len();
        let m = basis.len();
        let mut out = DMatrix::zeros(n, m);
        for (j, shape) in basis.shapes.iter().enumerate() {
            let field = ShapeField(shape);
            let col = if self.space.is_vector_valued() {
                self.apply_vector(&field, q)?
            } else {
                self.apply_scalar(&field, q)?
            };
            for i in 0..n {
                out[(i, j)] = col[i];
            }
        }
        Ok(out)
    }
}

/// DOF set for a space on an element kind, in the index order dual to the
/// published bases.
pub fn dof_set(space: SpaceKind, kind: ElemKind) -> DofSet {
    let mk = |kinds: Vec<DofKind>| DofSet {
        space,
        elem: kind,
        functionals: kinds
            .into_iter()
            .enumerate()
            .map(|(index, k)| DofFunctional {
                kind: k,
                elem: kind,
                index,
            })
            .collect(),
    };
    match (space, kind) {
        (SpaceKind::H1, _) => mk((0..kind.vertex_count())
            .map(|vertex| DofKind::VertexEval { vertex })
            .collect()),
        (SpaceKind::HCurl, ElemKind::Tet) => mk(edge_kinds(&TET_EDGES)),
        (SpaceKind::HCurl, ElemKind::Hex) => mk(edge_kinds(&HEX_EDGES)),
        (SpaceKind::HCurl, ElemKind::Pyramid) => mk(edge_kinds(&PYR_EDGES)),
        (SpaceKind::HDiv, ElemKind::Tet) => mk(TET_FACES
            .iter()
            .map(|f| DofKind::FaceFlux { corners: f.to_vec() })
            .collect()),
        (SpaceKind::HDiv, ElemKind::Hex) => mk(HEX_FACES
            .iter()
            .map(|f| DofKind::FaceFlux { corners: f.to_vec() })
            .collect()),
        (SpaceKind::HDiv, ElemKind::Pyramid) => {
            let mut kinds: Vec<DofKind> = PYR_TRI_FACES
                .iter()
                .map(|f| DofKind::FaceFlux { corners: f.to_vec() })
                .collect();
            kinds.push(DofKind::FaceFlux {
                corners: PYR_BASE.to_vec(),
            });
            kinds.push(DofKind::SignedDivDiff);
            mk(kinds)
        }
        (SpaceKind::L2, ElemKind::Tet) | (SpaceKind::L2, ElemKind::Hex) => {
            mk(vec![DofKind::CellIntegral])
        }
        (SpaceKind::L2, ElemKind::Pyramid) => {
            mk(vec![DofKind::CellMomentSum, DofKind::CellMomentDiff])
        }
    }
}

fn edge_kinds(edges: &[(usize, usize)]) -> Vec<DofKind> {
    edges
        .iter()
        .map(|&(tail, head)| DofKind::EdgeTangential { tail, head })
        .collect()
}

/// Local edge list of an element kind, in DOF order (0-based vertex pairs).
pub fn local_edges(kind: ElemKind) -> &'static [(usize, usize)] {
    match kind {
        ElemKind::Tet => &TET_EDGES,
        ElemKind::Hex => &HEX_EDGES,
        ElemKind::Pyramid => &PYR_EDGES,
    }
}

/// Local face corner lists of an element kind, in DOF order.
pub fn local_faces(kind: ElemKind) -> Vec<Vec<usize>> {
    match kind {
        ElemKind::Tet => TET_FACES.iter().map(|f| f.to_vec()).collect(),
        ElemKind::Hex => HEX_FACES.iter().map(|f| f.to_vec()).collect(),
        ElemKind::Pyramid => {
            let mut v: Vec<Vec<usize>> = PYR_TRI_FACES.iter().map(|f| f.to_vec()).collect();
            v.push(PYR_BASE.to_vec());
            v
        }
    }
}
