//! Reference domains, barycentric coordinates, the three element mappings
//! and their Jacobians.
//!
//! Reference elements:
//! - tetrahedron `{ 0 < x,y,z, x+y+z < 1 }` with vertices
//!   `(0,0,0), (1,0,0), (0,1,0), (0,0,1)`;
//! - hexahedron `(0,1)^3` with the bottom face numbered counter-clockwise
//!   `(0,0,0), (1,0,0), (1,1,0), (0,1,0)` and the top face above it;
//! - pyramid with base corners `(0,0,0), (1,0,0), (1,1,0), (0,1,0)` and apex
//!   `(1/2, 1/2, 1)`, split into two sub-tetrahedra along the `v1`-`v3`
//!   base diagonal.
//!
//! The tetrahedral map is affine, the hexahedral map trilinear, and the
//! pyramidal map piecewise quadratic: on each sub-tetrahedron it is the
//! affine interpolant of the vertices minus `lambda_1 lambda_2 * v_P`, where
//! `v_P = v1 - v2 + v3 - v4` measures how far the base is from a
//! parallelogram. The quadratic correction makes the base the bilinear patch
//! of its four corners, so the pyramid can sit conformingly against a
//! trilinear hexahedron.

use crate::{Error, Mat3, Point3, Result, Vec3};

/// Element kind of a reference or physical cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ElemKind {
    Tet,
    Hex,
    Pyramid,
}

impl ElemKind {
    pub fn vertex_count(self) -> usize {
        match self {
            ElemKind::Tet => 4,
            ElemKind::Hex => 8,
            ElemKind::Pyramid => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ElemKind::Tet => "tet",
            ElemKind::Hex => "hex",
            ElemKind::Pyramid => "pyramid",
        }
    }

    /// Canonical vertices of the reference element.
    pub fn reference_vertices(self) -> Vec<Point3> {
        match self {
            ElemKind::Tet => vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
                Point3::new(0.0, 0.0, 1.0),
            ],
            ElemKind::Hex => vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(1.0, 1.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
                Point3::new(0.0, 0.0, 1.0),
                Point3::new(1.0, 0.0, 1.0),
                Point3::new(1.0, 1.0, 1.0),
                Point3::new(0.0, 1.0, 1.0),
            ],
            ElemKind::Pyramid => vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(1.0, 1.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
                Point3::new(0.5, 0.5, 1.0),
            ],
        }
    }
}

/// One of the two sub-tetrahedra of the split pyramid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SubTetId {
    T1,
    T2,
}

impl SubTetId {
    pub fn index(self) -> usize {
        match self {
            SubTetId::T1 => 1,
            SubTetId::T2 => 2,
        }
    }

    /// Local-to-pyramid vertex permutation of the sub-tetrahedron.
    ///
    /// `T1 = (v3, v1, v2, v5)` and `T2 = (v1, v3, v4, v5)`; these orderings
    /// are what the closed-form barycentric coordinates below are dual to.
    pub fn vertex_permutation(self) -> [usize; 4] {
        match self {
            SubTetId::T1 => [2, 0, 1, 4],
            SubTetId::T2 => [0, 2, 3, 4],
        }
    }

    /// Constant gradients of the four barycentric coordinates on the
    /// reference sub-tetrahedron.
    pub fn bary_gradients(self) -> [Vec3; 4] {
        match self {
            SubTetId::T1 => [
                Vec3::new(0.0, 1.0, -0.5),
                Vec3::new(-1.0, 0.0, -0.5),
                Vec3::new(1.0, -1.0, 0.0),
                Vec3::new(0.0, 0.0, 1.0),
            ],
            SubTetId::T2 => [
                Vec3::new(0.0, -1.0, -0.5),
                Vec3::new(1.0, 0.0, -0.5),
                Vec3::new(-1.0, 1.0, 0.0),
                Vec3::new(0.0, 0.0, 1.0),
            ],
        }
    }

    /// Constant offsets of the barycentric coordinates (`lambda = c0 + g.x`).
    pub fn bary_offsets(self) -> [f64; 4] {
        match self {
            SubTetId::T1 => [0.0, 1.0, 0.0, 0.0],
            SubTetId::T2 => [1.0, 0.0, 0.0, 0.0],
        }
    }

    /// Barycentric coordinates of a reference point on this sub-tetrahedron.
    pub fn barycentric(self, p: &Point3) -> [f64; 4] {
        let c0 = self.bary_offsets();
        let g = self.bary_gradients();
        let mut out = [0.0; 4];
        for i in 0..4 {
            out[i] = c0[i] + g[i].dot(&p.coords);
        }
        out
    }
}

/// Sub-tetrahedron containing a reference pyramid point.
///
/// Points below or on the diagonal plane through `v1`, `v3` and the apex
/// (`x2 <= x1`) go to `T1`; ties resolve to `T1` so the rule is
/// deterministic on the interface.
pub fn pyramid_subtet_of(p: &Point3) -> SubTetId {
    if p.y <= p.x {
        SubTetId::T1
    } else {
        SubTetId::T2
    }
}

/// Barycentric coordinates of `p` with respect to an arbitrary
/// non-degenerate tetrahedron.
pub fn barycentric(tet_vertices: &[Point3; 4], p: &Point3) -> Result<[f64; 4]> {
    let [a, b, c, d] = tet_vertices;
    let m = Mat3::from_columns(&[b - a, c - a, d - a]);
    let vol6 = m.determinant();
    let scale = tet_vertices
        .iter()
        .flat_map(|u| tet_vertices.iter().map(move |w| (u - w).norm()))
        .fold(0.0f64, f64::max);
    if vol6.abs() <= 1e-13 * scale.powi(3).max(f64::MIN_POSITIVE) {
        return Err(Error::DegenerateTetrahedron { vol6 });
    }
    let rhs = p - a;
    let sol = m
        .try_inverse()
        .ok_or(Error::DegenerateTetrahedron { vol6 })?
        * rhs;
    Ok([1.0 - sol.x - sol.y - sol.z, sol.x, sol.y, sol.z])
}

/// Base defect `v1 - v2 + v3 - v4` of a quadrilateral; zero exactly when the
/// quad is a parallelogram (planar included).
pub fn vp_defect(quad: &[Point3; 4]) -> Vec3 {
    (quad[0] - quad[1]) + (quad[2] - quad[3])
}

/// Trilinear nodal basis values on the reference hexahedron.
fn hex_shape_values(p: &Point3) -> [f64; 8] {
    let (x, y, z) = (p.x, p.y, p.z);
    [
        (1.0 - x) * (1.0 - y) * (1.0 - z),
        x * (1.0 - y) * (1.0 - z),
        x * y * (1.0 - z),
        (1.0 - x) * y * (1.0 - z),
        (1.0 - x) * (1.0 - y) * z,
        x * (1.0 - y) * z,
        x * y * z,
        (1.0 - x) * y * z,
    ]
}

fn hex_shape_gradients(p: &Point3) -> [Vec3; 8] {
    let (x, y, z) = (p.x, p.y, p.z);
    let (xm, ym, zm) = (1.0 - x, 1.0 - y, 1.0 - z);
    [
        Vec3::new(-ym * zm, -xm * zm, -xm * ym),
        Vec3::new(ym * zm, -x * zm, -x * ym),
        Vec3::new(y * zm, x * zm, -x * y),
        Vec3::new(-y * zm, xm * zm, -xm * y),
        Vec3::new(-ym * z, -xm * z, xm * ym),
        Vec3::new(ym * z, -x * z, x * ym),
        Vec3::new(y * z, x * z, x * y),
        Vec3::new(-y * z, xm * z, xm * y),
    ]
}

/// A physical element: its kind plus the physical vertex list, in the
/// reference node ordering. Provides the mapping `Phi`, its Jacobian `F`,
/// the determinant `J` and the element diameter `h`.
#[derive(Clone, Debug)]
pub struct ElementMap {
    kind: ElemKind,
    vertices: Vec<Point3>,
}

impl ElementMap {
    pub fn new(kind: ElemKind, vertices: Vec<Point3>) -> Result<Self> {
        if vertices.len() != kind.vertex_count() {
            return Err(Error::BadElementArity {
                index: usize::MAX,
                kind: kind.name(),
                expected: kind.vertex_count(),
                got: vertices.len(),
            });
        }
        Ok(Self { kind, vertices })
    }

    /// The identity map: reference vertices as physical vertices.
    pub fn reference(kind: ElemKind) -> Self {
        Self {
            kind,
            vertices: kind.reference_vertices(),
        }
    }

    pub fn kind(&self) -> ElemKind {
        self.kind
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    /// Base defect of the pyramid's quadrilateral base (`None` for other
    /// kinds).
    pub fn base_defect(&self) -> Option<Vec3> {
        match self.kind {
            ElemKind::Pyramid => Some(vp_defect(&[
                self.vertices[0],
                self.vertices[1],
                self.vertices[2],
                self.vertices[3],
            ])),
            _ => None,
        }
    }

    /// Element diameter: the maximum pairwise vertex distance.
    pub fn diameter(&self) -> f64 {
        let mut h = 0.0f64;
        for i in 0..self.vertices.len() {
            for j in i + 1..self.vertices.len() {
                h = h.max((self.vertices[i] - self.vertices[j]).norm());
            }
        }
        h
    }

    /// Physical image of a reference point.
    pub fn map_point(&self, p: &Point3) -> Point3 {
        match self.kind {
            ElemKind::Tet => {
                let v = &self.vertices;
                v[0] + (v[1] - v[0]) * p.x + (v[2] - v[0]) * p.y + (v[3] - v[0]) * p.z
            }
            ElemKind::Hex => {
                let phi = hex_shape_values(p);
                let mut out = Vec3::zeros();
                for (w, v) in phi.iter().zip(&self.vertices) {
                    out += v.coords * *w;
                }
                Point3::from(out)
            }
            ElemKind::Pyramid => self.pyramid_map(pyramid_subtet_of(p), p),
        }
    }

    /// Pyramid map evaluated with a fixed sub-tetrahedron formula. The two
    /// formulas agree on the diagonal interface plane.
    pub fn pyramid_map(&self, sub: SubTetId, p: &Point3) -> Point3 {
        debug_assert_eq!(self.kind, ElemKind::Pyramid);
        let lambda = sub.barycentric(p);
        let perm = sub.vertex_permutation();
        let vp = self.base_defect().unwrap();
        let mut out = Vec3::zeros();
        for k in 0..4 {
            out += self.vertices[perm[k]].coords * lambda[k];
        }
        out -= vp * (lambda[0] * lambda[1]);
        Point3::from(out)
    }

    /// Analytic Jacobian matrix and determinant; errors when `J <= 0`.
    ///
    /// For pyramids the value is one-sided on the diagonal plane, with the
    /// side chosen by [`pyramid_subtet_of`].
    pub fn jacobian(&self, p: &Point3) -> Result<(Mat3, f64)> {
        let (f, j) = self.jacobian_unchecked(p);
        if j <= 0.0 {
            return Err(Error::NonPositiveJacobian {
                j,
                x: p.x,
                y: p.y,
                z: p.z,
            });
        }
        Ok((f, j))
    }

    /// Jacobian without the positivity check (validity diagnostics sample
    /// this directly).
    pub fn jacobian_unchecked(&self, p: &Point3) -> (Mat3, f64) {
        let f = match self.kind {
            ElemKind::Tet => {
                let v = &self.vertices;
                Mat3::from_columns(&[v[1] - v[0], v[2] - v[0], v[3] - v[0]])
            }
            ElemKind::Hex => {
                let grads = hex_shape_gradients(p);
                let mut f = Mat3::zeros();
                for (g, v) in grads.iter().zip(&self.vertices) {
                    f += v.coords * g.transpose();
                }
                f
            }
            ElemKind::Pyramid => {
                let sub = pyramid_subtet_of(p);
                let lambda = sub.barycentric(p);
                let g = sub.bary_gradients();
                let perm = sub.vertex_permutation();
                let vp = self.base_defect().unwrap();
                let mut f = Mat3::zeros();
                for k in 0..4 {
                    f += self.vertices[perm[k]].coords * g[k].transpose();
                }
                f -= vp * (g[0] * lambda[1] + g[1] * lambda[0]).transpose();
                f
            }
        };
        let j = f.determinant();
        (f, j)
    }

    /// Largest absolute entry of any second derivative of the map, maximized
    /// over the reference element (exact; the second derivatives are
    /// constant on tets/pyramid sub-tets and affine on hexes).
    pub fn second_derivative_sup(&self) -> f64 {
        match self.kind {
            ElemKind::Tet => 0.0,
            ElemKind::Pyramid => {
                let vp = self.base_defect().unwrap();
                let mut sup: f64 = 0.0;
                for sub in [SubTetId::T1, SubTetId::T2] {
                    let g = sub.bary_gradients();
                    for j in 0..3 {
                        for k in 0..3 {
                            let coeff = g[0][j] * g[1][k] + g[1][j] * g[0][k];
                            sup = sup.max(vp.amax() * coeff.abs());
                        }
                    }
                }
                sup
            }
            ElemKind::Hex => {
                // Mixed second partials are affine in the remaining
                // coordinate; their extrema sit at reference corners.
                let v = &self.vertices;
                let dxy0 = vp_defect(&[v[0], v[1], v[2], v[3]]);
                let dxy1 = vp_defect(&[v[4], v[5], v[6], v[7]]);
                let dxz0 = vp_defect(&[v[0], v[1], v[5], v[4]]);
                let dxz1 = vp_defect(&[v[3], v[2], v[6], v[7]]);
                let dyz0 = vp_defect(&[v[0], v[3], v[7], v[4]]);
                let dyz1 = vp_defect(&[v[1], v[2], v[6], v[5]]);
                [dxy0, dxy1, dxz0, dxz1, dyz0, dyz1]
                    .iter()
                    .map(|d| d.amax())
                    .fold(0.0, f64::max)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_interior(kind: ElemKind, rng: &mut StdRng) -> Point3 {
        loop {
            let p = Point3::new(rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>());
            let inside = match kind {
                ElemKind::Tet => p.x + p.y + p.z < 0.95,
                ElemKind::Hex => true,
                ElemKind::Pyramid => {
                    p.z < 0.9
                        && p.x > p.z / 2.0 + 0.01
                        && p.x < 1.0 - p.z / 2.0 - 0.01
                        && p.y > p.z / 2.0 + 0.01
                        && p.y < 1.0 - p.z / 2.0 - 0.01
                }
            };
            if inside {
                return p;
            }
        }
    }

    #[test]
    fn barycentric_vertex_duality_and_closed_forms() {
        // T1 of the reference pyramid: apex maps to (0,0,0,1).
        let pyr = ElemKind::Pyramid.reference_vertices();
        let t1: [Point3; 4] = SubTetId::T1.vertex_permutation().map(|i| pyr[i]);
        let lambda = barycentric(&t1, &pyr[4]).unwrap();
        assert_abs_diff_eq!(lambda[3], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(lambda[0].abs() + lambda[1].abs() + lambda[2].abs(), 0.0, epsilon = 1e-15);

        // closed-form lambda_1 on T1 is x2 - x3/2
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..50 {
            let p = random_interior(ElemKind::Pyramid, &mut rng);
            let general = barycentric(&t1, &p).unwrap();
            let closed = SubTetId::T1.barycentric(&p);
            for k in 0..4 {
                assert_abs_diff_eq!(general[k], closed[k], epsilon = 1e-13);
            }
            assert_abs_diff_eq!(closed[0], p.y - p.z / 2.0, epsilon = 1e-14);
            assert_abs_diff_eq!(closed.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
        }

        // unit tet symmetry point
        let tet: [Point3; 4] = ElemKind::Tet.reference_vertices().try_into().unwrap();
        let l = barycentric(&tet, &Point3::new(0.25, 0.25, 0.25)).unwrap();
        for c in l {
            assert_abs_diff_eq!(c, 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn barycentric_reconstructs_affine_functions() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..20 {
            let verts: [Point3; 4] = std::array::from_fn(|_| {
                Point3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let m = Mat3::from_columns(&[verts[1] - verts[0], verts[2] - verts[0], verts[3] - verts[0]]);
            if m.determinant().abs() < 1e-2 {
                continue;
            }
            let c0 = rng.gen_range(-1.0..1.0);
            let g = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let f = |p: &Point3| c0 + g.dot(&p.coords);
            let p = Point3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let lambda = barycentric(&verts, &p).unwrap();
            let recon: f64 = (0..4).map(|i| lambda[i] * f(&verts[i])).sum();
            assert_abs_diff_eq!(recon, f(&p), epsilon = 1e-12);
            assert_abs_diff_eq!(lambda.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn degenerate_tetrahedron_is_rejected() {
        let verts = [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(2.0, 0.0, 0.0),
            Point3::new(3.0, 0.0, 0.0),
        ];
        assert!(matches!(
            barycentric(&verts, &Point3::origin()),
            Err(Error::DegenerateTetrahedron { .. })
        ));
    }

    #[test]
    fn subtet_selector() {
        assert_eq!(pyramid_subtet_of(&Point3::new(0.7, 0.2, 0.1)), SubTetId::T1);
        assert_eq!(pyramid_subtet_of(&Point3::new(0.2, 0.7, 0.1)), SubTetId::T2);
        assert_eq!(pyramid_subtet_of(&Point3::new(0.5, 0.5, 0.3)), SubTetId::T1);
    }

    #[test]
    fn identity_maps_fix_reference_points() {
        let mut rng = StdRng::seed_from_u64(3);
        for kind in [ElemKind::Tet, ElemKind::Hex, ElemKind::Pyramid] {
            let map = ElementMap::reference(kind);
            for _ in 0..1000 {
                let p = random_interior(kind, &mut rng);
                let q = map.map_point(&p);
                assert!((q - p).norm() <= 1e-14, "{kind:?}: {p:?} -> {q:?}");
            }
            let (f, j) = map.jacobian(&Point3::new(0.3, 0.21, 0.11)).unwrap();
            assert!((f - Mat3::identity()).abs().max() <= 1e-14);
            assert_abs_diff_eq!(j, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn vertices_map_to_vertices() {
        let mut rng = StdRng::seed_from_u64(5);
        for kind in [ElemKind::Tet, ElemKind::Hex, ElemKind::Pyramid] {
            let verts: Vec<Point3> = kind
                .reference_vertices()
                .iter()
                .map(|v| {
                    Point3::new(
                        2.0 * v.x + rng.gen_range(-0.1..0.1),
                        1.5 * v.y + rng.gen_range(-0.1..0.1),
                        v.z + rng.gen_range(-0.1..0.1),
                    )
                })
                .collect();
            let map = ElementMap::new(kind, verts.clone()).unwrap();
            for (vr, vp) in kind.reference_vertices().iter().zip(&verts) {
                assert!((map.map_point(vr) - vp).norm() <= 1e-14);
            }
        }
    }

    #[test]
    fn hex_map_sends_unit_corner_to_v7() {
        let mut verts = ElemKind::Hex.reference_vertices();
        for v in verts.iter_mut() {
            v.x *= 2.0;
            v.y += 0.25 * v.x;
        }
        let map = ElementMap::new(ElemKind::Hex, verts.clone()).unwrap();
        assert!((map.map_point(&Point3::new(1.0, 1.0, 1.0)) - verts[6]).norm() <= 1e-14);
    }

    #[test]
    fn scaled_tet_jacobian() {
        let h = 0.37;
        let verts: Vec<Point3> = ElemKind::Tet
            .reference_vertices()
            .iter()
            .map(|v| Point3::from(v.coords * h))
            .collect();
        let map = ElementMap::new(ElemKind::Tet, verts).unwrap();
        let (_, j) = map.jacobian(&Point3::new(0.2, 0.2, 0.2)).unwrap();
        assert_abs_diff_eq!(j, h.powi(3), epsilon = 1e-15);
    }

    #[test]
    fn parallelepiped_hex_has_constant_jacobian() {
        let a = Vec3::new(1.0, 0.1, 0.0);
        let b = Vec3::new(-0.2, 1.3, 0.05);
        let c = Vec3::new(0.0, 0.2, 0.9);
        let origin = Point3::new(0.3, -0.1, 0.2);
        let verts: Vec<Point3> = ElemKind::Hex
            .reference_vertices()
            .iter()
            .map(|v| origin + a * v.x + b * v.y + c * v.z)
            .collect();
        let map = ElementMap::new(ElemKind::Hex, verts).unwrap();
        let (f0, _) = map.jacobian(&Point3::new(0.1, 0.8, 0.3)).unwrap();
        let (f1, _) = map.jacobian(&Point3::new(0.9, 0.2, 0.6)).unwrap();
        assert!((f0 - f1).abs().max() <= 1e-14);
    }

    fn skew_pyramid() -> ElementMap {
        ElementMap::new(
            ElemKind::Pyramid,
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.1, -0.05, 0.1),
                Point3::new(1.2, 1.1, 0.25),
                Point3::new(-0.1, 0.95, 0.0),
                Point3::new(0.45, 0.55, 1.05),
            ],
        )
        .unwrap()
    }

    #[test]
    fn pyramid_map_is_continuous_across_the_diagonal() {
        let map = skew_pyramid();
        let mut rng = StdRng::seed_from_u64(17);
        for _ in 0..100 {
            let z = rng.gen_range(0.0..0.95);
            let x = rng.gen_range(z / 2.0..1.0 - z / 2.0);
            let p = Point3::new(x, x, z);
            let a = map.pyramid_map(SubTetId::T1, &p);
            let b = map.pyramid_map(SubTetId::T2, &p);
            assert!((a - b).norm() <= 1e-14);
        }
    }

    #[test]
    fn pyramid_base_is_the_bilinear_patch() {
        let map = skew_pyramid();
        let v = map.vertices().to_vec();
        let mut rng = StdRng::seed_from_u64(19);
        for _ in 0..100 {
            let (u, w) = (rng.gen::<f64>(), rng.gen::<f64>());
            let patch = v[0].coords * ((1.0 - u) * (1.0 - w))
                + v[1].coords * (u * (1.0 - w))
                + v[2].coords * (u * w)
                + v[3].coords * ((1.0 - u) * w);
            let q = map.map_point(&Point3::new(u, w, 0.0));
            assert!((q.coords - patch).norm() <= 1e-14);
        }
        // Midpoint of the reference base diagonal lands on the patch
        // centroid (v1+v2+v3+v4)/4, not on the chord midpoint.
        let q = map.map_point(&Point3::new(0.5, 0.5, 0.0));
        let centroid = (v[0].coords + v[1].coords + v[2].coords + v[3].coords) / 4.0;
        assert!((q.coords - centroid).norm() <= 1e-14);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = StdRng::seed_from_u64(23);
        let maps = vec![
            ElementMap::new(
                ElemKind::Tet,
                vec![
                    Point3::new(0.1, 0.0, 0.0),
                    Point3::new(1.2, 0.1, 0.0),
                    Point3::new(0.0, 0.9, 0.2),
                    Point3::new(0.2, 0.1, 1.1),
                ],
            )
            .unwrap(),
            {
                let verts: Vec<Point3> = ElemKind::Hex
                    .reference_vertices()
                    .iter()
                    .map(|v| {
                        Point3::new(
                            v.x + 0.1 * v.y * v.z,
                            v.y - 0.05 * v.x,
                            v.z + 0.08 * v.x * v.y,
                        )
                    })
                    .collect();
                ElementMap::new(ElemKind::Hex, verts).unwrap()
            },
            skew_pyramid(),
        ];
        let h = 1e-6;
        for map in maps {
            for _ in 0..50 {
                let p = random_interior(map.kind(), &mut rng);
                // keep the stencil inside a single pyramid sub-tet
                if map.kind() == ElemKind::Pyramid && (p.x - p.y).abs() < 10.0 * h {
                    continue;
                }
                let (f, _) = map.jacobian(&p).unwrap();
                for j in 0..3 {
                    let mut hi = p;
                    let mut lo = p;
                    hi[j] += h;
                    lo[j] -= h;
                    let fd = (map.map_point(&hi) - map.map_point(&lo)) / (2.0 * h);
                    for i in 0..3 {
                        let denom = f[(i, j)].abs().max(1.0);
                        assert!(
                            (f[(i, j)] - fd[i]).abs() / denom <= 1e-6,
                            "{:?} d{}/d{}",
                            map.kind(),
                            i,
                            j
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn vp_defect_examples() {
        let unit: [Point3; 4] = [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(1.0, 1.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        ];
        assert_eq!(vp_defect(&unit), Vec3::zeros());
        let eps = 1e-3;
        let bent = [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(1.0, 1.0, eps),
            Point3::new(0.0, 1.0, 0.0),
        ];
        assert_eq!(vp_defect(&bent), Vec3::new(0.0, 0.0, eps));
    }

    #[test]
    fn nonpositive_jacobian_is_reported() {
        // Flip the apex below the base.
        let map = ElementMap::new(
            ElemKind::Pyramid,
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(1.0, 1.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
                Point3::new(0.5, 0.5, -1.0),
            ],
        )
        .unwrap();
        assert!(matches!(
            map.jacobian(&Point3::new(0.4, 0.3, 0.2)),
            Err(Error::NonPositiveJacobian { .. })
        ));
    }
}
