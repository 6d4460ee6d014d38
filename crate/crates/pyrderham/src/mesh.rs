//! THP mesh data model: typed elements over shared vertices, conformity
//! validation, uniform refinement and distortion diagnostics.
//!
//! A THP partition mixes affine tetrahedra, trilinear-mapped hexahedra and
//! pyramids whose quadrilateral base is the bilinear patch of its corners.
//! Uniform refinement splits every tet into 8 tets, every hex into 8 hexes
//! (new nodes at edge midpoints, face centroids and the cell centroid), and
//! every pyramid into 4 pyramids plus 8 tets (edge midpoints and the base
//! centroid). New vertices are deduplicated by the sorted ids of their
//! generating parent vertices, so children of neighbouring elements share
//! nodes bit-for-bit and conformity is preserved.
//!
//! The interior octahedron of a refined tetrahedron needs a diagonal: the
//! default uses the fixed `13`-`24` connectivity, verbatim; the alternative
//! picks the shortest of the three diagonals per element, which keeps the
//! child shapes non-degenerate (diameters halve) under repeated refinement.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::dof::{local_edges, local_faces};
use crate::quadrature::{rule_for, Domain};
use crate::refgeom::{vp_defect, ElemKind, ElementMap};
use crate::{Error, Point3, Result, Vec3};

/// One mesh element: kind plus global vertex ids in the local node order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Element {
    pub kind: ElemKind,
    pub nodes: Vec<usize>,
}

impl Element {
    pub fn new(kind: ElemKind, nodes: Vec<usize>) -> Self {
        Self { kind, nodes }
    }
}

/// Strategy for the interior diagonal of tetrahedral refinement.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TetDiagonal {
    /// Fixed `13`-`24` connectivity with the published child tuples.
    #[default]
    Fixed,
    /// Shortest of the three interior diagonals, ties broken
    /// lexicographically by the sorted global ids of the endpoints.
    Shortest,
}

/// A conformity violation found by [`ThpMesh::validate`].
#[derive(Clone, Debug)]
pub enum Violation {
    DuplicateVertices { a: usize, b: usize, dist: f64 },
    OverSharedFace { face: Vec<usize>, count: usize },
    NonPositiveJacobian { element: usize, point: Point3, j: f64 },
    BadElement { element: usize, detail: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateVertices { a, b, dist } => {
                write!(f, "vertices {a} and {b} coincide (distance {dist:.3e})")
            }
            Violation::OverSharedFace { face, count } => {
                write!(f, "face {face:?} shared by {count} elements")
            }
            Violation::NonPositiveJacobian { element, point, j } => write!(
                f,
                "element {element} inverted: J = {j:.3e} at ({:.3}, {:.3}, {:.3})",
                point.x, point.y, point.z
            ),
            Violation::BadElement { element, detail } => {
                write!(f, "element {element}: {detail}")
            }
        }
    }
}

/// Validation outcome; empty violation list means the mesh conforms.
#[derive(Clone, Debug, Default)]
pub struct ConformityReport {
    pub violations: Vec<Violation>,
}

impl ConformityReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ConformityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            write!(f, "mesh conforms")
        } else {
            for v in &self.violations {
                writeln!(f, "{v}")?;
            }
            Ok(())
        }
    }
}

/// Distortion diagnostics of a mesh.
#[derive(Clone, Debug)]
pub struct DistortionReport {
    /// `(element index, |v_P|)` per pyramid
    pub pyramid_defects: Vec<(usize, f64)>,
    /// `(element index, defect per face)` per hex in the face order
    /// `x=0, x=1, y=0, y=1, bottom (z=0), top (z=1)`
    pub hex_defects: Vec<(usize, [f64; 6])>,
    /// mesh size (max element diameter)
    pub h: f64,
    /// max |F| entry over sampled quadrature points and corners
    pub max_f: f64,
    /// max and min Jacobian determinant over the samples
    pub max_j: f64,
    pub min_j: f64,
    /// max second-derivative magnitude of any element map
    pub max_f1: f64,
}

impl DistortionReport {
    pub fn max_pyramid_defect(&self) -> f64 {
        self.pyramid_defects.iter().map(|&(_, d)| d).fold(0.0, f64::max)
    }

    pub fn max_hex_defect(&self) -> f64 {
        self.hex_defects
            .iter()
            .flat_map(|(_, d)| d.iter().copied())
            .fold(0.0, f64::max)
    }
}

/// Vertices plus typed element connectivity.
#[derive(Clone, Debug)]
pub struct ThpMesh {
    pub vertices: Vec<Point3>,
    pub elements: Vec<Element>,
}

impl ThpMesh {
    pub fn new(vertices: Vec<Point3>, elements: Vec<Element>) -> Result<Self> {
        for (index, e) in elements.iter().enumerate() {
            if e.nodes.len() != e.kind.vertex_count() {
                return Err(Error::BadElementArity {
                    index,
                    kind: e.kind.name(),
                    expected: e.kind.vertex_count(),
                    got: e.nodes.len(),
                });
            }
        }
        Ok(Self { vertices, elements })
    }

    pub fn element_map(&self, index: usize) -> ElementMap {
        let e = &self.elements[index];
        let verts = e.nodes.iter().map(|&i| self.vertices[i]).collect();
        ElementMap::new(e.kind, verts).expect("element arity checked at construction")
    }

    /// Mesh size: maximum element diameter.
    pub fn mesh_size(&self) -> f64 {
        (0..self.elements.len())
            .map(|i| self.element_map(i).diameter())
            .fold(0.0, f64::max)
    }

    /// Total volume by quadrature of the Jacobian (compensated summation;
    /// plain accumulation over ~1e5 elements loses the last digit).
    pub fn volume(&self) -> f64 {
        let mut sum = 0.0;
        let mut carry = 0.0;
        for i in 0..self.elements.len() {
            let y = self.element_volume(i) - carry;
            let t = sum + y;
            carry = (t - sum) - y;
            sum = t;
        }
        sum
    }

    pub fn element_volume(&self, index: usize) -> f64 {
        let map = self.element_map(index);
        let domain = match map.kind() {
            ElemKind::Tet => Domain::Tet,
            ElemKind::Hex => Domain::Hex,
            ElemKind::Pyramid => Domain::Pyramid,
        };
        let rule = rule_for(domain, 4).unwrap();
        rule.integrate(|p| self.jacobian_at(&map, p))
    }

    fn jacobian_at(&self, map: &ElementMap, p: &Point3) -> f64 {
        map.jacobian_unchecked(p).1
    }

    /// All geometric edges as sorted global id pairs.
    pub fn edge_set(&self) -> BTreeSet<(usize, usize)> {
        let mut edges = BTreeSet::new();
        for e in &self.elements {
            for &(a, b) in local_edges(e.kind) {
                let (ga, gb) = (e.nodes[a], e.nodes[b]);
                edges.insert((ga.min(gb), ga.max(gb)));
            }
        }
        edges
    }

    /// Face incidence: sorted vertex-id key to `(element, local face)`
    /// adjacency, in deterministic key order.
    pub fn face_table(&self) -> BTreeMap<Vec<usize>, Vec<(usize, usize)>> {
        let mut faces: BTreeMap<Vec<usize>, Vec<(usize, usize)>> = BTreeMap::new();
        for (ei, e) in self.elements.iter().enumerate() {
            for (fi, corners) in local_faces(e.kind).into_iter().enumerate() {
                let mut key: Vec<usize> = corners.iter().map(|&c| e.nodes[c]).collect();
                key.sort_unstable();
                faces.entry(key).or_default().push((ei, fi));
            }
        }
        faces
    }

    /// Vertices lying on the mesh boundary (incident to a once-shared face).
    pub fn boundary_vertices(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for (key, adj) in self.face_table() {
            if adj.len() == 1 {
                out.extend(key);
            }
        }
        out
    }

    /// Conformity and validity report: duplicate vertices, over-shared
    /// faces, inverted elements.
    pub fn validate(&self) -> ConformityReport {
        let mut violations = Vec::new();

        for (index, e) in self.elements.iter().enumerate() {
            let mut sorted = e.nodes.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != e.nodes.len() {
                violations.push(Violation::BadElement {
                    element: index,
                    detail: "repeated vertex id".into(),
                });
            }
            if e.nodes.iter().any(|&n| n >= self.vertices.len()) {
                violations.push(Violation::BadElement {
                    element: index,
                    detail: "vertex id out of range".into(),
                });
            }
        }
        if !violations.is_empty() {
            return ConformityReport { violations };
        }

        // duplicate vertices: sweep in x order with a tolerance window
        let tol = 1e-12;
        let mut order: Vec<usize> = (0..self.vertices.len()).collect();
        order.sort_by(|&a, &b| self.vertices[a].x.total_cmp(&self.vertices[b].x));
        for (k, &a) in order.iter().enumerate() {
            for &b in order[k + 1..].iter() {
                if self.vertices[b].x - self.vertices[a].x > tol {
                    break;
                }
                let dist = (self.vertices[a] - self.vertices[b]).norm();
                if dist <= tol {
                    violations.push(Violation::DuplicateVertices {
                        a: a.min(b),
                        b: a.max(b),
                        dist,
                    });
                }
            }
        }

        for (key, adj) in self.face_table() {
            if adj.len() > 2 {
                violations.push(Violation::OverSharedFace {
                    face: key,
                    count: adj.len(),
                });
            }
        }

        // positive Jacobian at quadrature points and reference vertices
        for index in 0..self.elements.len() {
            let map = self.element_map(index);
            let domain = match map.kind() {
                ElemKind::Tet => Domain::Tet,
                ElemKind::Hex => Domain::Hex,
                ElemKind::Pyramid => Domain::Pyramid,
            };
            let mut points = rule_for(domain, 2).unwrap().points;
            points.extend(sample_corners(map.kind()));
            for p in points {
                let (_, j) = map.jacobian_unchecked(&p);
                if j <= 0.0 {
                    violations.push(Violation::NonPositiveJacobian {
                        element: index,
                        point: p,
                        j,
                    });
                    break;
                }
            }
        }

        ConformityReport { violations }
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_valid()
    }

    /// Uniform refinement with the default (fixed) tet diagonal.
    pub fn refine(&self) -> Result<ThpMesh> {
        self.refine_with(TetDiagonal::Fixed)
    }

    /// Uniform refinement of every element; fails on invalid input.
    pub fn refine_with(&self, diagonal: TetDiagonal) -> Result<ThpMesh> {
        let report = self.validate();
        if !report.is_valid() {
            return Err(Error::InvalidMesh(report.to_string()));
        }
        let mut vertices = self.vertices.clone();
        let mut cache: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut elements = Vec::with_capacity(self.elements.len() * 8);

        for e in &self.elements {
            let resolve = |ids: &[usize], vertices: &mut Vec<Point3>, cache: &mut HashMap<Vec<usize>, usize>| -> usize {
                if ids.len() == 1 {
                    return ids[0];
                }
                let mut key = ids.to_vec();
                key.sort_unstable();
                if let Some(&v) = cache.get(&key) {
                    return v;
                }
                let mut c = Vec3::zeros();
                for &i in ids {
                    c += vertices[i].coords;
                }
                let v = vertices.len();
                vertices.push(Point3::from(c / ids.len() as f64));
                cache.insert(key, v);
                v
            };
            let node = |sym: &Sym, vertices: &mut Vec<Point3>, cache: &mut HashMap<Vec<usize>, usize>| -> usize {
                let ids: Vec<usize> = sym.parents().iter().map(|&s| e.nodes[s]).collect();
                resolve(&ids, vertices, cache)
            };
            match e.kind {
                ElemKind::Tet => match diagonal {
                    TetDiagonal::Fixed => {
                        for child in TET_CHILDREN_FIXED {
                            let nodes = child
                                .iter()
                                .map(|s| node(s, &mut vertices, &mut cache))
                                .collect();
                            elements.push(Element::new(ElemKind::Tet, nodes));
                        }
                    }
                    TetDiagonal::Shortest => {
                        for child in TET_CORNER_CHILDREN {
                            let nodes = child
                                .iter()
                                .map(|s| node(s, &mut vertices, &mut cache))
                                .collect();
                            elements.push(Element::new(ElemKind::Tet, nodes));
                        }
                        // midpoints as global ids
                        let mid = |a: usize, b: usize,
                                   vertices: &mut Vec<Point3>,
                                   cache: &mut HashMap<Vec<usize>, usize>| {
                            resolve(&[e.nodes[a], e.nodes[b]], vertices, cache)
                        };
                        let m = [
                            mid(0, 1, &mut vertices, &mut cache),
                            mid(0, 2, &mut vertices, &mut cache),
                            mid(0, 3, &mut vertices, &mut cache),
                            mid(1, 2, &mut vertices, &mut cache),
                            mid(1, 3, &mut vertices, &mut cache),
                            mid(2, 3, &mut vertices, &mut cache),
                        ];
                        // candidate diagonals (midpoint indices into `m`):
                        // 13-24, 14-23, 12-34
                        let cands: [((usize, usize), [usize; 4]); 3] = [
                            ((1, 4), [0, 2, 5, 3]),
                            ((2, 3), [0, 1, 5, 4]),
                            ((0, 5), [1, 2, 4, 3]),
                        ];
                        let mut best: Option<((usize, usize), [usize; 4], f64, (usize, usize))> =
                            None;
                        for ((da, db), ring) in cands {
                            let len = (vertices[m[da]] - vertices[m[db]]).norm();
                            let id_pair = (m[da].min(m[db]), m[da].max(m[db]));
                            let better = match &best {
                                None => true,
                                Some((_, _, blen, bpair)) => {
                                    len < blen - 1e-12 * blen.max(1.0)
                                        || ((len - blen).abs() <= 1e-12 * blen.max(1.0)
                                            && id_pair < *bpair)
                                }
                            };
                            if better {
                                best = Some(((da, db), ring, len, id_pair));
                            }
                        }
                        let ((da, db), ring, _, _) = best.unwrap();
                        for r in 0..4 {
                            let mut nodes = vec![m[da], m[db], m[ring[r]], m[ring[(r + 1) % 4]]];
                            let t: Vec<Point3> = nodes.iter().map(|&i| vertices[i]).collect();
                            let vol6 = nalgebra::Matrix3::from_columns(&[
                                t[1] - t[0],
                                t[2] - t[0],
                                t[3] - t[0],
                            ])
                            .determinant();
                            if vol6 < 0.0 {
                                nodes.swap(2, 3);
                            }
                            elements.push(Element::new(ElemKind::Tet, nodes));
                        }
                    }
                },
                ElemKind::Hex => {
                    for child in HEX_CHILDREN {
                        let nodes = child
                            .iter()
                            .map(|s| node(s, &mut vertices, &mut cache))
                            .collect();
                        elements.push(Element::new(ElemKind::Hex, nodes));
                    }
                }
                ElemKind::Pyramid => {
                    for child in PYR_CHILD_PYRAMIDS {
                        let nodes = child
                            .iter()
                            .map(|s| node(s, &mut vertices, &mut cache))
                            .collect();
                        elements.push(Element::new(ElemKind::Pyramid, nodes));
                    }
                    for child in PYR_CHILD_TETS {
                        let nodes = child
                            .iter()
                            .map(|s| node(s, &mut vertices, &mut cache))
                            .collect();
                        elements.push(Element::new(ElemKind::Tet, nodes));
                    }
                }
            }
        }
        ThpMesh::new(vertices, elements)
    }

    /// Distortion diagnostics: quad-face defects, mesh size and Jacobian
    /// extrema over quadrature samples.
    pub fn distortion(&self) -> DistortionReport {
        let mut pyramid_defects = Vec::new();
        let mut hex_defects = Vec::new();
        let mut max_f = 0.0f64;
        let mut max_j = f64::NEG_INFINITY;
        let mut min_j = f64::INFINITY;
        let mut max_f1 = 0.0f64;
        for (i, e) in self.elements.iter().enumerate() {
            let map = self.element_map(i);
            match e.kind {
                ElemKind::Pyramid => {
                    pyramid_defects.push((i, map.base_defect().unwrap().norm()));
                }
                ElemKind::Hex => {
                    let v = map.vertices();
                    let defect = |c: [usize; 4]| {
                        vp_defect(&[v[c[0]], v[c[1]], v[c[2]], v[c[3]]]).norm()
                    };
                    hex_defects.push((
                        i,
                        [
                            defect([0, 3, 7, 4]),
                            defect([1, 2, 6, 5]),
                            defect([0, 1, 5, 4]),
                            defect([3, 2, 6, 7]),
                            defect([0, 1, 2, 3]),
                            defect([4, 5, 6, 7]),
                        ],
                    ));
                }
                ElemKind::Tet => {}
            }
            let domain = match e.kind {
                ElemKind::Tet => Domain::Tet,
                ElemKind::Hex => Domain::Hex,
                ElemKind::Pyramid => Domain::Pyramid,
            };
            let mut points = rule_for(domain, 4).unwrap().points;
            points.extend(sample_corners(e.kind));
            for p in &points {
                let (f, j) = map.jacobian_unchecked(p);
                max_f = max_f.max(f.abs().max());
                max_j = max_j.max(j);
                min_j = min_j.min(j);
            }
            max_f1 = max_f1.max(map.second_derivative_sup());
        }
        DistortionReport {
            pyramid_defects,
            hex_defects,
            h: self.mesh_size(),
            max_f,
            max_j,
            min_j,
            max_f1,
        }
    }

    /// Displace every interior vertex by `magnitude` times its local mesh
    /// size along a seeded pseudo-random unit vector. Fails if the result
    /// does not validate.
    pub fn perturb_interior(&self, magnitude: f64, seed: u64) -> Result<ThpMesh> {
        let boundary = self.boundary_vertices();
        // local size: shortest incident edge
        let mut local_h = vec![f64::INFINITY; self.vertices.len()];
        for &(a, b) in &self.edge_set() {
            let len = (self.vertices[a] - self.vertices[b]).norm();
            local_h[a] = local_h[a].min(len);
            local_h[b] = local_h[b].min(len);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vertices = self.vertices.clone();
        for v in 0..vertices.len() {
            // draw for every vertex so the displacement field does not
            // depend on which vertices happen to be interior
            let dir: [f64; 3] = UnitSphere.sample(&mut rng);
            if boundary.contains(&v) || !local_h[v].is_finite() {
                continue;
            }
            vertices[v] += Vec3::new(dir[0], dir[1], dir[2]) * (magnitude * local_h[v]);
        }
        let mesh = ThpMesh::new(vertices, self.elements.clone())?;
        let report = mesh.validate();
        if !report.is_valid() {
            return Err(Error::InvalidMesh(report.to_string()));
        }
        Ok(mesh)
    }

    // -- mesh file format ---------------------------------------------------

    pub fn to_json(&self) -> String {
        let file = MeshFile {
            version: 1,
            vertices: self.vertices.iter().map(|v| [v.x, v.y, v.z]).collect(),
            elements: self
                .elements
                .iter()
                .map(|e| FileElement {
                    kind: match e.kind {
                        ElemKind::Tet => "tet".into(),
                        ElemKind::Hex => "hex".into(),
                        ElemKind::Pyramid => "pyr".into(),
                    },
                    nodes: e.nodes.clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("mesh serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<ThpMesh> {
        let file: MeshFile = serde_json::from_str(text)?;
        if file.version != 1 {
            return Err(Error::UnsupportedVersion(file.version));
        }
        let vertices = file
            .vertices
            .iter()
            .map(|&[x, y, z]| Point3::new(x, y, z))
            .collect();
        let elements = file
            .elements
            .into_iter()
            .map(|e| {
                let kind = match e.kind.as_str() {
                    "tet" => ElemKind::Tet,
                    "hex" => ElemKind::Hex,
                    "pyr" => ElemKind::Pyramid,
                    other => return Err(Error::UnknownElementKind(other.into())),
                };
                Ok(Element::new(kind, e.nodes))
            })
            .collect::<Result<Vec<_>>>()?;
        ThpMesh::new(vertices, elements)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ThpMesh> {
        let text = std::fs::read_to_string(path)?;
        ThpMesh::from_json(&text)
    }
}

fn sample_corners(kind: ElemKind) -> Vec<Point3> {
    kind.reference_vertices()
}

#[derive(Serialize, Deserialize)]
struct MeshFile {
    version: u32,
    vertices: Vec<[f64; 3]>,
    elements: Vec<FileElement>,
}

#[derive(Serialize, Deserialize)]
struct FileElement {
    kind: String,
    nodes: Vec<usize>,
}

/// Symbolic child node: a parent vertex, an edge midpoint, a face centroid
/// or the cell centroid (0-based parent slots).
#[derive(Clone, Copy, Debug)]
enum Sym {
    V(usize),
    E(usize, usize),
    F(usize, usize, usize, usize),
    C8,
}

impl Sym {
    fn parents(&self) -> Vec<usize> {
        match *self {
            Sym::V(a) => vec![a],
            Sym::E(a, b) => vec![a, b],
            Sym::F(a, b, c, d) => vec![a, b, c, d],
            Sym::C8 => (0..8).collect(),
        }
    }
}

use Sym::{C8, E, F, V};

/// Tet children with the fixed interior diagonal, published connectivity.
const TET_CHILDREN_FIXED: [[Sym; 4]; 8] = [
    [V(0), E(0, 1), E(0, 2), E(0, 3)],
    [E(0, 1), V(1), E(1, 2), E(1, 3)],
    [E(0, 2), E(1, 2), V(2), E(2, 3)],
    [E(0, 3), E(1, 3), E(2, 3), V(3)],
    [E(0, 3), E(0, 1), E(0, 2), E(1, 3)],
    [E(0, 2), E(0, 1), E(1, 2), E(1, 3)],
    [E(0, 2), E(1, 2), E(2, 3), E(1, 3)],
    [E(0, 2), E(2, 3), E(0, 3), E(1, 3)],
];

/// The four corner children common to every diagonal choice.
const TET_CORNER_CHILDREN: [[Sym; 4]; 4] = [
    [V(0), E(0, 1), E(0, 2), E(0, 3)],
    [E(0, 1), V(1), E(1, 2), E(1, 3)],
    [E(0, 2), E(1, 2), V(2), E(2, 3)],
    [E(0, 3), E(1, 3), E(2, 3), V(3)],
];

/// Hex children: corners, edge midpoints, face centroids, cell centroid.
const HEX_CHILDREN: [[Sym; 8]; 8] = [
    [
        E(0, 4),
        F(0, 4, 5, 1),
        C8,
        F(0, 3, 7, 4),
        V(4),
        E(4, 5),
        F(4, 5, 6, 7),
        E(4, 7),
    ],
    [
        F(0, 3, 7, 4),
        C8,
        F(2, 3, 7, 6),
        E(3, 7),
        E(4, 7),
        F(4, 5, 6, 7),
        E(6, 7),
        V(7),
    ],
    [
        F(0, 4, 5, 1),
        E(1, 5),
        F(1, 2, 6, 5),
        C8,
        E(4, 5),
        V(5),
        E(5, 6),
        F(4, 5, 6, 7),
    ],
    [
        C8,
        F(1, 2, 6, 5),
        E(2, 6),
        F(2, 3, 7, 6),
        F(4, 5, 6, 7),
        E(5, 6),
        V(6),
        E(6, 7),
    ],
    [
        V(0),
        E(0, 1),
        F(0, 1, 2, 3),
        E(0, 3),
        E(0, 4),
        F(0, 4, 5, 1),
        C8,
        F(0, 3, 7, 4),
    ],
    [
        E(0, 3),
        F(0, 1, 2, 3),
        E(2, 3),
        V(3),
        F(0, 3, 7, 4),
        C8,
        F(2, 3, 7, 6),
        E(3, 7),
    ],
    [
        E(0, 1),
        V(1),
        E(1, 2),
        F(0, 1, 2, 3),
        F(0, 4, 5, 1),
        E(1, 5),
        F(1, 2, 6, 5),
        C8,
    ],
    [
        F(0, 1, 2, 3),
        E(1, 2),
        V(2),
        E(2, 3),
        C8,
        F(1, 2, 6, 5),
        E(2, 6),
        F(2, 3, 7, 6),
    ],
];

/// Pyramid children: four pyramids with lateral-edge-midpoint apexes.
const PYR_CHILD_PYRAMIDS: [[Sym; 5]; 4] = [
    [V(0), E(0, 1), F(0, 1, 2, 3), E(0, 3), E(0, 4)],
    [E(0, 1), V(1), E(1, 2), F(0, 1, 2, 3), E(1, 4)],
    [F(0, 1, 2, 3), E(1, 2), V(2), E(2, 3), E(2, 4)],
    [E(0, 3), F(0, 1, 2, 3), E(2, 3), V(3), E(3, 4)],
];

/// Pyramid children: eight tetrahedra filling the lateral wedges and the
/// apex region. The second and third wedge tuples are transposed relative
/// to the published list, which is orientation-inconsistent as printed;
/// this ordering keeps every child positively oriented and follows the
/// base rotation symmetry of the first and fourth tuples.
const PYR_CHILD_TETS: [[Sym; 4]; 8] = [
    [E(0, 1), E(0, 4), E(1, 4), F(0, 1, 2, 3)],
    [E(1, 2), E(1, 4), E(2, 4), F(0, 1, 2, 3)],
    [E(2, 3), E(2, 4), E(3, 4), F(0, 1, 2, 3)],
    [E(0, 3), E(3, 4), E(0, 4), F(0, 1, 2, 3)],
    [E(0, 4), E(1, 4), E(2, 4), V(4)],
    [E(0, 4), E(2, 4), E(3, 4), V(4)],
    [E(0, 4), E(2, 4), E(1, 4), F(0, 1, 2, 3)],
    [E(0, 4), E(3, 4), E(2, 4), F(0, 1, 2, 3)],
];

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn single(kind: ElemKind) -> ThpMesh {
        let verts = kind.reference_vertices();
        let nodes = (0..verts.len()).collect();
        ThpMesh::new(verts, vec![Element::new(kind, nodes)]).unwrap()
    }

    /// A pyramid with a visibly non-planar base.
    fn skew_pyramid_mesh() -> ThpMesh {
        ThpMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.05, -0.02, 0.08),
                Point3::new(1.1, 1.04, 0.2),
                Point3::new(-0.03, 0.97, -0.05),
                Point3::new(0.48, 0.52, 1.02),
            ],
            vec![Element::new(ElemKind::Pyramid, vec![0, 1, 2, 3, 4])],
        )
        .unwrap()
    }

    #[test]
    fn single_elements_validate() {
        for kind in [ElemKind::Tet, ElemKind::Hex, ElemKind::Pyramid] {
            assert!(single(kind).is_valid());
        }
    }

    #[test]
    fn mismatched_glued_tets_are_flagged() {
        // Two tets meant to share a face, but the second uses its own copies
        // of the shared vertices.
        let mesh = ThpMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
                Point3::new(0.0, 0.0, 1.0),
                // duplicates of 0..=2
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
                Point3::new(0.3, 0.3, -1.0),
            ],
            vec![
                Element::new(ElemKind::Tet, vec![0, 1, 2, 3]),
                Element::new(ElemKind::Tet, vec![4, 6, 5, 7]),
            ],
        )
        .unwrap();
        let report = mesh.validate();
        assert!(!report.is_valid());
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::DuplicateVertices { .. })));
    }

    #[test]
    fn inverted_element_is_flagged() {
        let mut mesh = single(ElemKind::Tet);
        mesh.vertices[3].z = -1.0;
        let report = mesh.validate();
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::NonPositiveJacobian { .. })));
    }

    #[test]
    fn refinement_counts() {
        let tet = single(ElemKind::Tet).refine().unwrap();
        assert_eq!(tet.elements.len(), 8);
        assert!(tet.elements.iter().all(|e| e.kind == ElemKind::Tet));

        let hex = single(ElemKind::Hex);
        let mut m = hex.clone();
        for _ in 0..2 {
            m = m.refine().unwrap();
        }
        assert_eq!(m.elements.len(), 64);
        assert!(m.elements.iter().all(|e| e.kind == ElemKind::Hex));

        let pyr = single(ElemKind::Pyramid).refine().unwrap();
        assert_eq!(pyr.elements.len(), 12);
        assert_eq!(pyr.vertices.len(), 14);
        let pyrs = pyr.elements.iter().filter(|e| e.kind == ElemKind::Pyramid).count();
        let tets = pyr.elements.iter().filter(|e| e.kind == ElemKind::Tet).count();
        assert_eq!((pyrs, tets), (4, 8));
        assert!(pyr.is_valid());
    }

    #[test]
    fn refinement_conserves_volume() {
        for mesh in [single(ElemKind::Tet), single(ElemKind::Hex), skew_pyramid_mesh()] {
            let v0 = mesh.volume();
            let mut m = mesh;
            for _ in 0..2 {
                m = m.refine().unwrap();
                assert!(m.is_valid());
                let v = m.volume();
                assert!((v - v0).abs() <= 1e-12 * v0.abs());
            }
        }
    }

    #[test]
    fn pyramid_child_base_defects_scale_by_a_quarter() {
        let mesh = skew_pyramid_mesh();
        let parent = mesh.distortion().max_pyramid_defect();
        assert!(parent > 1e-3);
        let fine = mesh.refine().unwrap();
        for (i, d) in fine.distortion().pyramid_defects {
            assert!(
                (d - parent / 4.0).abs() <= 1e-12 * parent,
                "child {i}: {d} vs {}",
                parent / 4.0
            );
        }
    }

    #[test]
    fn hex_child_face_defects_follow_the_averaging_identities() {
        // distinct bottom and top defects
        let mut verts = ElemKind::Hex.reference_vertices();
        verts[2] += Vec3::new(0.0, 0.0, 0.11); // bends bottom face
        verts[6] += Vec3::new(0.05, 0.0, -0.07); // bends top face
        let mesh = ThpMesh::new(
            verts.clone(),
            vec![Element::new(ElemKind::Hex, (0..8).collect())],
        )
        .unwrap();
        assert!(mesh.is_valid());
        let bot = vp_defect(&[verts[0], verts[1], verts[2], verts[3]]);
        let top = vp_defect(&[verts[4], verts[5], verts[6], verts[7]]);

        let fine = mesh.refine().unwrap();
        // first listed child sits on the top half: bottom face at the
        // mid-plane, top face a quarter of the original top
        let child = fine.element_map(0);
        let v = child.vertices();
        let child_bot = vp_defect(&[v[0], v[1], v[2], v[3]]);
        let child_top = vp_defect(&[v[4], v[5], v[6], v[7]]);
        assert!((child_top - top / 4.0).norm() <= 1e-12 * top.norm().max(1.0));
        assert!((child_bot - (bot + top) / 8.0).norm() <= 1e-12 * (bot + top).norm().max(1.0));

        // a bottom-half child: bottom quarter-defect, mid-plane top
        let child = fine.element_map(4);
        let v = child.vertices();
        let child_bot = vp_defect(&[v[0], v[1], v[2], v[3]]);
        let child_top = vp_defect(&[v[4], v[5], v[6], v[7]]);
        assert!((child_bot - bot / 4.0).norm() <= 1e-12 * bot.norm().max(1.0));
        assert!((child_top - (bot + top) / 8.0).norm() <= 1e-12 * (bot + top).norm().max(1.0));
    }

    #[test]
    fn affine_meshes_have_zero_defects() {
        let report = single(ElemKind::Hex).distortion();
        assert_eq!(report.max_hex_defect(), 0.0);
        let report = single(ElemKind::Pyramid).distortion();
        assert_eq!(report.max_pyramid_defect(), 0.0);
    }

    #[test]
    fn shortest_diagonal_halves_diameters() {
        // pyramid-split tets: the fixed diagonal produces flat interior
        // children, the shortest diagonal halves exactly
        let verts = vec![
            Point3::new(2.0, 0.0, 0.0),
            Point3::new(2.0, 0.0, 1.0),
            Point3::new(2.0, 1.0, 1.0),
            Point3::new(2.0, 1.0, 0.0),
            Point3::new(1.5, 0.5, 0.5),
        ];
        let mesh = ThpMesh::new(
            verts,
            vec![
                Element::new(ElemKind::Tet, vec![2, 0, 1, 4]),
                Element::new(ElemKind::Tet, vec![0, 2, 3, 4]),
            ],
        )
        .unwrap();
        assert!(mesh.is_valid());
        let mut m = mesh;
        let mut h = m.mesh_size();
        for _ in 0..3 {
            m = m.refine_with(TetDiagonal::Shortest).unwrap();
            assert!(m.is_valid());
            let h2 = m.mesh_size();
            assert!(h2 <= 0.5 * h + 1e-12, "h {h} -> {h2}");
            h = h2;
        }
    }

    #[test]
    fn json_round_trip() {
        let mesh = skew_pyramid_mesh().refine().unwrap();
        let text = mesh.to_json();
        let back = ThpMesh::from_json(&text).unwrap();
        assert_eq!(back.elements, mesh.elements);
        assert_eq!(back.vertices.len(), mesh.vertices.len());
        for (a, b) in back.vertices.iter().zip(&mesh.vertices) {
            assert_abs_diff_eq!((a - b).norm(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn bad_version_and_kind_are_rejected() {
        let bad_version = r#"{"version": 2, "vertices": [], "elements": []}"#;
        assert!(matches!(
            ThpMesh::from_json(bad_version),
            Err(Error::UnsupportedVersion(2))
        ));
        let bad_kind = r#"{"version": 1, "vertices": [[0,0,0]], "elements": [{"kind": "prism", "nodes": [0]}]}"#;
        assert!(matches!(
            ThpMesh::from_json(bad_kind),
            Err(Error::UnknownElementKind(_))
        ));
    }

    #[test]
    fn perturb_interior_keeps_boundary_and_validates() {
        let mesh = single(ElemKind::Hex).refine().unwrap();
        let boundary = mesh.boundary_vertices();
        let perturbed = mesh.perturb_interior(0.1, 42).unwrap();
        assert!(perturbed.is_valid());
        let mut moved = 0;
        for v in 0..mesh.vertices.len() {
            let d = (perturbed.vertices[v] - mesh.vertices[v]).norm();
            if boundary.contains(&v) {
                assert_eq!(d, 0.0);
            } else if d > 0.0 {
                moved += 1;
            }
        }
        // the refined cube has exactly one interior vertex (the center)
        assert_eq!(moved, 1);
        // determinism
        let again = mesh.perturb_interior(0.1, 42).unwrap();
        for (a, b) in again.vertices.iter().zip(&perturbed.vertices) {
            assert_eq!(a, b);
        }
    }
}
