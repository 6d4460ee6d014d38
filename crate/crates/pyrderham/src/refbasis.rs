//! Closed-form reference shape functions and their exterior derivatives for
//! all four spaces on tetrahedra, hexahedra and the composite pyramid.
//!
//! Tet and hex shapes are the classic lowest-order Lagrange / Nédélec (first
//! kind) / Raviart-Thomas / piecewise-constant bases. The pyramid shapes are
//! composite: piecewise polynomials over the two sub-tetrahedra of the
//! `v1`-`v3` split, built from the sub-tet barycentric coordinates, with
//! single-valued value / tangential / normal trace on the internal diagonal
//! face (for H¹ / H(curl) / H(div) respectively). The edge shapes combine
//! Whitney edge forms `w_ij = l_i grad l_j - l_j grad l_i`, and the face
//! shapes Whitney face forms
//! `chi_ijk = l_i grad l_j x grad l_k + (cyclic)`.
//!
//! Everything is stored as exact polynomial data per sub-domain, so values
//! and derivatives evaluate without numerical differentiation.

use std::sync::OnceLock;

use crate::poly::{Poly, VPoly};
use crate::refgeom::{pyramid_subtet_of, ElemKind, SubTetId};
use crate::{Error, Point3, Result, Vec3};

/// One of the four spaces of the de Rham complex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SpaceKind {
    H1,
    HCurl,
    HDiv,
    L2,
}

impl SpaceKind {
    pub const ALL: [SpaceKind; 4] = [SpaceKind::H1, SpaceKind::HCurl, SpaceKind::HDiv, SpaceKind::L2];

    pub fn is_vector_valued(self) -> bool {
        matches!(self, SpaceKind::HCurl | SpaceKind::HDiv)
    }

    pub fn name(self) -> &'static str {
        match self {
            SpaceKind::H1 => "h1",
            SpaceKind::HCurl => "hcurl",
            SpaceKind::HDiv => "hdiv",
            SpaceKind::L2 => "l2",
        }
    }

    /// Next space in the sequence `H1 -> Hcurl -> Hdiv -> L2`.
    pub fn next(self) -> Option<SpaceKind> {
        match self {
            SpaceKind::H1 => Some(SpaceKind::HCurl),
            SpaceKind::HCurl => Some(SpaceKind::HDiv),
            SpaceKind::HDiv => Some(SpaceKind::L2),
            SpaceKind::L2 => None,
        }
    }

    /// Local space dimension on an element kind.
    pub fn dimension(self, kind: ElemKind) -> usize {
        match (self, kind) {
            (SpaceKind::H1, ElemKind::Tet) => 4,
            (SpaceKind::H1, ElemKind::Hex) => 8,
            (SpaceKind::H1, ElemKind::Pyramid) => 5,
            (SpaceKind::HCurl, ElemKind::Tet) => 6,
            (SpaceKind::HCurl, ElemKind::Hex) => 12,
            (SpaceKind::HCurl, ElemKind::Pyramid) => 8,
            (SpaceKind::HDiv, ElemKind::Tet) => 4,
            (SpaceKind::HDiv, ElemKind::Hex) => 6,
            (SpaceKind::HDiv, ElemKind::Pyramid) => 6,
            (SpaceKind::L2, ElemKind::Tet) | (SpaceKind::L2, ElemKind::Hex) => 1,
            (SpaceKind::L2, ElemKind::Pyramid) => 2,
        }
    }
}

/// Scalar or vector field value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Value {
    Scalar(f64),
    Vector(Vec3),
}

impl Value {
    pub fn scalar(self) -> f64 {
        match self {
            Value::Scalar(s) => s,
            Value::Vector(_) => panic!("expected scalar value"),
        }
    }

    pub fn vector(self) -> Vec3 {
        match self {
            Value::Vector(v) => v,
            Value::Scalar(_) => panic!("expected vector value"),
        }
    }

    pub fn abs_max(self) -> f64 {
        match self {
            Value::Scalar(s) => s.abs(),
            Value::Vector(v) => v.amax(),
        }
    }

    pub fn sub(self, other: Value) -> Value {
        match (self, other) {
            (Value::Scalar(a), Value::Scalar(b)) => Value::Scalar(a - b),
            (Value::Vector(a), Value::Vector(b)) => Value::Vector(a - b),
            _ => panic!("value arity mismatch"),
        }
    }
}

/// Scalar or vector polynomial data, either on the whole element or per
/// pyramid sub-tetrahedron.
#[derive(Clone, Debug)]
enum Pieces<T> {
    Single(T),
    Split(T, T),
}

impl<T> Pieces<T> {
    fn at(&self, p: &Point3) -> &T {
        match self {
            Pieces::Single(t) => t,
            Pieces::Split(a, b) => match pyramid_subtet_of(p) {
                SubTetId::T1 => a,
                SubTetId::T2 => b,
            },
        }
    }

    fn on(&self, sub: SubTetId) -> &T {
        match self {
            Pieces::Single(t) => t,
            Pieces::Split(a, b) => match sub {
                SubTetId::T1 => a,
                SubTetId::T2 => b,
            },
        }
    }

    fn map<U>(&self, f: impl Fn(&T) -> U) -> Pieces<U> {
        match self {
            Pieces::Single(t) => Pieces::Single(f(t)),
            Pieces::Split(a, b) => Pieces::Split(f(a), f(b)),
        }
    }
}

#[derive(Clone, Debug)]
enum ShapeData {
    Scalar(Pieces<Poly>),
    Vector(Pieces<VPoly>),
}

#[derive(Clone, Debug)]
enum DerivData {
    /// gradient of an H1 shape
    Gradient(Pieces<VPoly>),
    /// curl of an H(curl) shape
    Curl(Pieces<VPoly>),
    /// divergence of an H(div) shape
    Divergence(Pieces<Poly>),
    /// L2 shapes have no exterior derivative
    None,
}

/// One shape function: exact piecewise-polynomial value and derivative.
#[derive(Clone, Debug)]
pub struct ShapeFunction {
    pub space: SpaceKind,
    pub elem_kind: ElemKind,
    pub index: usize,
    data: ShapeData,
    deriv: DerivData,
}

impl ShapeFunction {
    /// Value at a reference point; the pyramid sub-tet is selected by
    /// [`pyramid_subtet_of`] (ties to `T1`).
    pub fn eval_value(&self, p: &Point3) -> Value {
        match &self.data {
            ShapeData::Scalar(pieces) => Value::Scalar(pieces.at(p).eval(p)),
            ShapeData::Vector(pieces) => Value::Vector(pieces.at(p).eval(p)),
        }
    }

    /// Exterior derivative (gradient / curl / divergence) at a reference
    /// point; one-sided on the diagonal face. Errors for L2 shapes.
    pub fn eval_derivative(&self, p: &Point3) -> Result<Value> {
        Ok(match &self.deriv {
            DerivData::Gradient(pieces) | DerivData::Curl(pieces) => {
                Value::Vector(pieces.at(p).eval(p))
            }
            DerivData::Divergence(pieces) => Value::Scalar(pieces.at(p).eval(p)),
            DerivData::None => return Err(Error::UnsupportedDerivative),
        })
    }

    /// Value evaluated with a fixed sub-tet formula (pyramids only differ).
    pub fn eval_value_on(&self, sub: SubTetId, p: &Point3) -> Value {
        match &self.data {
            ShapeData::Scalar(pieces) => Value::Scalar(pieces.on(sub).eval(p)),
            ShapeData::Vector(pieces) => Value::Vector(pieces.on(sub).eval(p)),
        }
    }

    /// Scalar value (H1/L2 shapes).
    pub fn scalar_at(&self, p: &Point3) -> f64 {
        self.eval_value(p).scalar()
    }

    /// Vector value (Hcurl/Hdiv shapes).
    pub fn vector_at(&self, p: &Point3) -> Vec3 {
        self.eval_value(p).vector()
    }

    /// Analytic divergence (Hdiv shapes).
    pub fn divergence_at(&self, p: &Point3) -> Result<f64> {
        match &self.deriv {
            DerivData::Divergence(pieces) => Ok(pieces.at(p).eval(p)),
            _ => Err(Error::ArityMismatch),
        }
    }
}

/// The ordered shape functions of one space on one element kind.
#[derive(Clone, Debug)]
pub struct BasisSet {
    pub space: SpaceKind,
    pub elem_kind: ElemKind,
    pub shapes: Vec<ShapeFunction>,
}

impl BasisSet {
    pub fn len(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }
}

/// Build the basis for a space on an element kind, in the published index
/// order.
pub fn basis(space: SpaceKind, kind: ElemKind) -> BasisSet {
    let data: Vec<ShapeData> = match (space, kind) {
        (SpaceKind::H1, ElemKind::Tet) => tet_h1(),
        (SpaceKind::HCurl, ElemKind::Tet) => tet_hcurl(),
        (SpaceKind::HDiv, ElemKind::Tet) => tet_hdiv(),
        (SpaceKind::L2, ElemKind::Tet) => vec![ShapeData::Scalar(Pieces::Single(Poly::constant(6.0)))],
        (SpaceKind::H1, ElemKind::Hex) => hex_h1(),
        (SpaceKind::HCurl, ElemKind::Hex) => hex_hcurl(),
        (SpaceKind::HDiv, ElemKind::Hex) => hex_hdiv(),
        (SpaceKind::L2, ElemKind::Hex) => vec![ShapeData::Scalar(Pieces::Single(Poly::constant(1.0)))],
        (SpaceKind::H1, ElemKind::Pyramid) => pyramid_h1(),
        (SpaceKind::HCurl, ElemKind::Pyramid) => pyramid_hcurl(),
        (SpaceKind::HDiv, ElemKind::Pyramid) => pyramid_hdiv(),
        (SpaceKind::L2, ElemKind::Pyramid) => pyramid_l2(),
    };
    let shapes = data
        .into_iter()
        .enumerate()
        .map(|(index, data)| {
            let deriv = match (space, &data) {
                (SpaceKind::H1, ShapeData::Scalar(p)) => DerivData::Gradient(p.map(Poly::gradient)),
                (SpaceKind::HCurl, ShapeData::Vector(p)) => DerivData::Curl(p.map(VPoly::curl)),
                (SpaceKind::HDiv, ShapeData::Vector(p)) => {
                    DerivData::Divergence(p.map(VPoly::divergence))
                }
                (SpaceKind::L2, _) => DerivData::None,
                _ => unreachable!("space/arity mismatch in basis construction"),
            };
            ShapeFunction {
                space,
                elem_kind: kind,
                index,
                data,
                deriv,
            }
        })
        .collect();
    BasisSet {
        space,
        elem_kind: kind,
        shapes,
    }
}

/// Cached basis; evaluation-heavy code paths share one construction.
pub fn basis_cached(space: SpaceKind, kind: ElemKind) -> &'static BasisSet {
    static CACHE: OnceLock<Vec<BasisSet>> = OnceLock::new();
    let all = CACHE.get_or_init(|| {
        let mut v = Vec::new();
        for space in SpaceKind::ALL {
            for kind in [ElemKind::Tet, ElemKind::Hex, ElemKind::Pyramid] {
                v.push(basis(space, kind));
            }
        }
        v
    });
    all.iter()
        .find(|b| b.space == space && b.elem_kind == kind)
        .unwrap()
}

// ---------------------------------------------------------------------------
// tetrahedron
// ---------------------------------------------------------------------------

fn tet_lambdas() -> [Poly; 4] {
    [
        Poly::affine(1.0, Vec3::new(-1.0, -1.0, -1.0)),
        Poly::affine(0.0, Vec3::new(1.0, 0.0, 0.0)),
        Poly::affine(0.0, Vec3::new(0.0, 1.0, 0.0)),
        Poly::affine(0.0, Vec3::new(0.0, 0.0, 1.0)),
    ]
}

fn tet_gradients() -> [Vec3; 4] {
    [
        Vec3::new(-1.0, -1.0, -1.0),
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(0.0, 1.0, 0.0),
        Vec3::new(0.0, 0.0, 1.0),
    ]
}

fn whitney_edge(l: &[Poly; 4], g: &[Vec3; 4], i: usize, j: usize) -> VPoly {
    VPoly::scaled_vec(&l[i], g[j]).sub(&VPoly::scaled_vec(&l[j], g[i]))
}

fn whitney_face(l: &[Poly; 4], g: &[Vec3; 4], i: usize, j: usize, k: usize) -> VPoly {
    VPoly::scaled_vec(&l[i], g[j].cross(&g[k]))
        .add(&VPoly::scaled_vec(&l[j], g[k].cross(&g[i])))
        .add(&VPoly::scaled_vec(&l[k], g[i].cross(&g[j])))
}

fn tet_h1() -> Vec<ShapeData> {
    tet_lambdas()
        .into_iter()
        .map(|p| ShapeData::Scalar(Pieces::Single(p)))
        .collect()
}

/// Edge order implied by the published basis: the tangential-integral DOFs
/// dual to it run over the oriented edges
/// `(2,3), (1,4), (3,4), (1,2), (4,2), (1,3)` (1-based).
pub const TET_EDGES: [(usize, usize); 6] = [(1, 2), (0, 3), (2, 3), (0, 1), (3, 1), (0, 2)];

/// Face order: face `i` is opposite vertex `i`, outward normal.
pub const TET_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];

fn tet_hcurl() -> Vec<ShapeData> {
    let l = tet_lambdas();
    let g = tet_gradients();
    TET_EDGES
        .iter()
        .map(|&(i, j)| ShapeData::Vector(Pieces::Single(whitney_edge(&l, &g, i, j))))
        .collect()
}

fn tet_hdiv() -> Vec<ShapeData> {
    // psi_1 = 2(x,y,z), psi_2 = 2(x-1,y,z), psi_3 = 2(x,y-1,z),
    // psi_4 = 2(x,y,z-1)
    let x = Poly::affine(0.0, Vec3::new(1.0, 0.0, 0.0));
    let y = Poly::affine(0.0, Vec3::new(0.0, 1.0, 0.0));
    let z = Poly::affine(0.0, Vec3::new(0.0, 0.0, 1.0));
    let shift = |p: &Poly| p.sub(&Poly::constant(1.0));
    let mk = |vx: Poly, vy: Poly, vz: Poly| {
        ShapeData::Vector(Pieces::Single(VPoly([vx.scale(2.0), vy.scale(2.0), vz.scale(2.0)])))
    };
    vec![
        mk(x.clone(), y.clone(), z.clone()),
        mk(shift(&x), y.clone(), z.clone()),
        mk(x.clone(), shift(&y), z.clone()),
        mk(x, y, shift(&z)),
    ]
}

// ---------------------------------------------------------------------------
// hexahedron
// ---------------------------------------------------------------------------

fn coord(axis: usize) -> Poly {
    let mut g = Vec3::zeros();
    g[axis] = 1.0;
    Poly::affine(0.0, g)
}

fn one_minus(axis: usize) -> Poly {
    Poly::constant(1.0).sub(&coord(axis))
}

fn hex_h1() -> Vec<ShapeData> {
    let f = |xs: [bool; 3]| {
        let factors: Vec<Poly> = (0..3)
            .map(|a| if xs[a] { coord(a) } else { one_minus(a) })
            .collect();
        factors[0].mul(&factors[1]).mul(&factors[2])
    };
    // Node order: bottom counter-clockwise then top.
    [
        [false, false, false],
        [true, false, false],
        [true, true, false],
        [false, true, false],
        [false, false, true],
        [true, false, true],
        [true, true, true],
        [false, true, true],
    ]
    .into_iter()
    .map(|xs| ShapeData::Scalar(Pieces::Single(f(xs))))
    .collect()
}

/// Hex edge order matching the published edge basis (0-based pairs).
pub const HEX_EDGES: [(usize, usize); 12] = [
    (0, 1),
    (4, 5),
    (3, 2),
    (0, 3),
    (1, 2),
    (4, 7),
    (0, 4),
    (3, 7),
    (1, 5),
    (7, 6),
    (5, 6),
    (2, 6),
];

/// Hex face order `x=0, x=1, y=0, y=1, z=0, z=1` with cyclic corner tuples.
pub const HEX_FACES: [[usize; 4]; 6] = [
    [0, 3, 7, 4],
    [1, 2, 6, 5],
    [0, 1, 5, 4],
    [3, 2, 6, 7],
    [0, 1, 2, 3],
    [4, 5, 6, 7],
];

fn hex_hcurl() -> Vec<ShapeData> {
    let unit = |axis: usize| {
        let mut v = Vec3::zeros();
        v[axis] = 1.0;
        v
    };
    let mk = |p: Poly, axis: usize| ShapeData::Vector(Pieces::Single(VPoly::scaled_vec(&p, unit(axis))));
    vec![
        mk(one_minus(1).mul(&one_minus(2)), 0),
        mk(one_minus(1).mul(&coord(2)), 0),
        mk(coord(1).mul(&one_minus(2)), 0),
        mk(one_minus(2).mul(&one_minus(0)), 1),
        mk(one_minus(2).mul(&coord(0)), 1),
        mk(coord(2).mul(&one_minus(0)), 1),
        mk(one_minus(0).mul(&one_minus(1)), 2),
        mk(one_minus(0).mul(&coord(1)), 2),
        mk(coord(0).mul(&one_minus(1)), 2),
        mk(coord(1).mul(&coord(2)), 0),
        mk(coord(2).mul(&coord(0)), 1),
        mk(coord(0).mul(&coord(1)), 2),
    ]
}

fn hex_hdiv() -> Vec<ShapeData> {
    let unit = |axis: usize| {
        let mut v = Vec3::zeros();
        v[axis] = 1.0;
        v
    };
    let mut out = Vec::new();
    for axis in 0..3 {
        let low = coord(axis).sub(&Poly::constant(1.0));
        let high = coord(axis);
        out.push(ShapeData::Vector(Pieces::Single(VPoly::scaled_vec(&low, unit(axis)))));
        out.push(ShapeData::Vector(Pieces::Single(VPoly::scaled_vec(&high, unit(axis)))));
    }
    out
}

// ---------------------------------------------------------------------------
// composite pyramid
// ---------------------------------------------------------------------------

/// Pyramid edge order `E1..E8 = e12, e14, e15, e23, e25, e34, e35, e45`
/// (0-based pairs), oriented low vertex number to high.
pub const PYR_EDGES: [(usize, usize); 8] = [
    (0, 1),
    (0, 3),
    (0, 4),
    (1, 2),
    (1, 4),
    (2, 3),
    (2, 4),
    (3, 4),
];

/// Pyramid face order `F1..F5 = f125, f145, f235, f345, f1234` (0-based).
pub const PYR_TRI_FACES: [[usize; 3]; 4] = [[0, 1, 4], [0, 3, 4], [1, 2, 4], [2, 3, 4]];
pub const PYR_BASE: [usize; 4] = [0, 1, 2, 3];

fn subtet_lambdas(sub: SubTetId) -> [Poly; 4] {
    let c0 = sub.bary_offsets();
    let g = sub.bary_gradients();
    std::array::from_fn(|i| Poly::affine(c0[i], g[i]))
}

fn pyramid_h1() -> Vec<ShapeData> {
    let mk = |t1: Poly, t2: Poly| ShapeData::Scalar(Pieces::Split(t1, t2));
    let a = subtet_lambdas(SubTetId::T1);
    let b = subtet_lambdas(SubTetId::T2);
    let a12 = a[0].mul(&a[1]);
    let b12 = b[0].mul(&b[1]);
    vec![
        mk(a[1].sub(&a12), b[0].sub(&b12)),
        mk(a[2].add(&a12), b12.clone()),
        mk(a[0].sub(&a12), b[1].sub(&b12)),
        mk(a12.clone(), b[2].add(&b12)),
        mk(a[3].clone(), b[3].clone()),
    ]
}

fn pyramid_hcurl() -> Vec<ShapeData> {
    let la = subtet_lambdas(SubTetId::T1);
    let ga = SubTetId::T1.bary_gradients();
    let lb = subtet_lambdas(SubTetId::T2);
    let gb = SubTetId::T2.bary_gradients();
    // `w(i,j)` is the Whitney edge form, `lg(i,j) = l_i grad l_j`; indices
    // are 1-based sub-tet local vertex numbers to match the construction.
    let wa = |i: usize, j: usize| whitney_edge(&la, &ga, i - 1, j - 1);
    let wb = |i: usize, j: usize| whitney_edge(&lb, &gb, i - 1, j - 1);
    let lga = |i: usize, j: usize| VPoly::scaled_vec(&la[i - 1], ga[j - 1]);
    let lgb = |i: usize, j: usize| VPoly::scaled_vec(&lb[i - 1], gb[j - 1]);
    let mk = |t1: VPoly, t2: VPoly| ShapeData::Vector(Pieces::Split(t1, t2));
    vec![
        mk(wa(2, 3).add(&lga(2, 1)), lgb(1, 2)),
        mk(lga(2, 1), wb(1, 3).add(&lgb(1, 2))),
        mk(wa(2, 4), wb(1, 4)),
        mk(wa(3, 1).sub(&lga(1, 2)), lgb(2, 1).scale(-1.0)),
        mk(wa(3, 4), VPoly::zero()),
        mk(lga(1, 2), wb(2, 3).add(&lgb(2, 1))),
        mk(wa(1, 4), wb(2, 4)),
        mk(VPoly::zero(), wb(3, 4)),
    ]
}

fn pyramid_hdiv() -> Vec<ShapeData> {
    let la = subtet_lambdas(SubTetId::T1);
    let ga = SubTetId::T1.bary_gradients();
    let lb = subtet_lambdas(SubTetId::T2);
    let gb = SubTetId::T2.bary_gradients();
    let ca = |i: usize, j: usize, k: usize| whitney_face(&la, &ga, i - 1, j - 1, k - 1);
    let cb = |i: usize, j: usize, k: usize| whitney_face(&lb, &gb, i - 1, j - 1, k - 1);
    let mk = |t1: VPoly, t2: VPoly| ShapeData::Vector(Pieces::Split(t1, t2));
    vec![
        mk(ca(2, 3, 4).scale(2.0).sub(&ca(1, 2, 4)), cb(1, 2, 4)),
        mk(ca(1, 2, 4), cb(1, 4, 3).scale(2.0).sub(&cb(1, 2, 4))),
        mk(ca(1, 4, 3).scale(2.0).sub(&ca(1, 2, 4)), cb(1, 2, 4)),
        mk(ca(1, 2, 4), cb(2, 3, 4).scale(2.0).sub(&cb(1, 2, 4))),
        mk(ca(1, 3, 2), cb(1, 3, 2)),
        mk(ca(1, 2, 4), cb(1, 2, 4).scale(-1.0)),
    ]
}

fn pyramid_l2() -> Vec<ShapeData> {
    // The L2 shapes are the divergences of the 5th and 6th H(div) shapes:
    // piecewise 1/(2|T_l|) with signs (+,+) and (+,-).
    let hdiv = pyramid_hdiv();
    [4usize, 5]
        .into_iter()
        .map(|i| match &hdiv[i] {
            ShapeData::Vector(Pieces::Split(a, b)) => {
                ShapeData::Scalar(Pieces::Split(a.divergence(), b.divergence()))
            }
            _ => unreachable!(),
        })
        .collect()
}
