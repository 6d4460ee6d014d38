//! Fixed-order quadrature on the reference domains.
//!
//! Segments, quads and hexes use tensor-product Gauss-Legendre. Triangles
//! and tetrahedra use well-known symmetric positive rules for low degrees
//! and positive collapsed (conical-product) rules beyond that, so every
//! advertised degree is exact without large coefficient tables. The pyramid
//! rule is the union of two tetrahedral rules mapped onto the sub-tetrahedra
//! of the split, which is exact for the piecewise-polynomial integrands the
//! composite elements produce.

use crate::refgeom::SubTetId;
use crate::{Error, Mat3, Point3, Result};

pub const MAX_DEGREE: usize = 10;

/// Integration domain of a rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Segment,
    Triangle,
    Quad,
    Tet,
    Hex,
    Pyramid,
}

impl Domain {
    /// Measure of the reference domain (the weights sum to this).
    pub fn measure(self) -> f64 {
        match self {
            Domain::Segment | Domain::Quad | Domain::Hex => 1.0,
            Domain::Triangle => 0.5,
            Domain::Tet => 1.0 / 6.0,
            Domain::Pyramid => 1.0 / 3.0,
        }
    }
}

/// A quadrature rule: points, positive weights, guaranteed exactness degree.
#[derive(Clone, Debug)]
pub struct QuadRule {
    pub domain: Domain,
    pub points: Vec<Point3>,
    pub weights: Vec<f64>,
    pub exact_degree: usize,
}

impl QuadRule {
    /// `sum_i w_i f(p_i)`.
    pub fn integrate(&self, f: impl FnMut(&Point3) -> f64) -> f64 {
        integrate(self, f)
    }
}

/// Smallest available rule on `domain` with exactness at least `degree`.
pub fn rule_for(domain: Domain, degree: usize) -> Result<QuadRule> {
    if !(1..=MAX_DEGREE).contains(&degree) {
        return Err(Error::DegreeOutOfRange {
            degree,
            max: MAX_DEGREE,
        });
    }
    Ok(match domain {
        Domain::Segment => segment_rule(degree),
        Domain::Quad => tensor_rule(Domain::Quad, degree, 2),
        Domain::Hex => tensor_rule(Domain::Hex, degree, 3),
        Domain::Triangle => triangle_rule(degree),
        Domain::Tet => tet_rule(degree),
        Domain::Pyramid => pyramid_rule(degree),
    })
}

/// `sum_i w_i f(p_i)`.
pub fn integrate(rule: &QuadRule, mut f: impl FnMut(&Point3) -> f64) -> f64 {
    rule.points
        .iter()
        .zip(&rule.weights)
        .map(|(p, w)| w * f(p))
        .sum()
}

/// Gauss-Legendre nodes and weights on [0, 1], exact to degree `2n - 1`.
/// Newton iteration on the Legendre recurrence; accurate to machine
/// precision for the orders used here.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        nodes[i] = 0.5 * (1.0 - x); // descending cos order -> ascending node
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn points_for_degree(degree: usize) -> usize {
    degree / 2 + 1
}

fn segment_rule(degree: usize) -> QuadRule {
    let n = points_for_degree(degree);
    let (x, w) = gauss_legendre(n);
    QuadRule {
        domain: Domain::Segment,
        points: x.iter().map(|&s| Point3::new(s, 0.0, 0.0)).collect(),
        weights: w,
        exact_degree: 2 * n - 1,
    }
}

fn tensor_rule(domain: Domain, degree: usize, dim: usize) -> QuadRule {
    let n = points_for_degree(degree);
    let (x, w) = gauss_legendre(n);
    let mut points = Vec::new();
    let mut weights = Vec::new();
    match dim {
        2 => {
            for (i, &xi) in x.iter().enumerate() {
                for (j, &xj) in x.iter().enumerate() {
                    points.push(Point3::new(xi, xj, 0.0));
                    weights.push(w[i] * w[j]);
                }
            }
        }
        3 => {
            for (i, &xi) in x.iter().enumerate() {
                for (j, &xj) in x.iter().enumerate() {
                    for (k, &xk) in x.iter().enumerate() {
                        points.push(Point3::new(xi, xj, xk));
                        weights.push(w[i] * w[j] * w[k]);
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    QuadRule {
        domain,
        points,
        weights,
        exact_degree: 2 * n - 1,
    }
}

/// Symmetric positive triangle rules for degrees <= 5, collapsed
/// conical-product rules beyond (positive, exact, not symmetric).
fn triangle_rule(degree: usize) -> QuadRule {
    let (pts, wts, exact): (Vec<[f64; 2]>, Vec<f64>, usize) = match degree {
        1 => (vec![[1.0 / 3.0, 1.0 / 3.0]], vec![0.5], 1),
        2 => {
            let a = 1.0 / 6.0;
            let b = 2.0 / 3.0;
            (
                vec![[a, a], [b, a], [a, b]],
                vec![1.0 / 6.0; 3],
                2,
            )
        }
        3 | 4 => {
            // Strang degree-4, 6 points, two symmetric orbits.
            let a = 0.445_948_490_915_965;
            let wa = 0.223_381_589_678_011 / 2.0;
            let b = 0.091_576_213_509_771;
            let wb = 0.109_951_743_655_322 / 2.0;
            (
                vec![
                    [a, a],
                    [1.0 - 2.0 * a, a],
                    [a, 1.0 - 2.0 * a],
                    [b, b],
                    [1.0 - 2.0 * b, b],
                    [b, 1.0 - 2.0 * b],
                ],
                vec![wa, wa, wa, wb, wb, wb],
                4,
            )
        }
        5 => {
            let a = 0.470_142_064_105_115;
            let wa = 0.132_394_152_788_506 / 2.0;
            let b = 0.101_286_507_323_456;
            let wb = 0.125_939_180_544_827 / 2.0;
            let mut p = vec![[1.0 / 3.0, 1.0 / 3.0]];
            let mut w = vec![0.225 / 2.0];
            for (c, wc) in [(a, wa), (b, wb)] {
                p.extend_from_slice(&[[c, c], [1.0 - 2.0 * c, c], [c, 1.0 - 2.0 * c]]);
                w.extend_from_slice(&[wc, wc, wc]);
            }
            (p, w, 5)
        }
        d => {
            // x = s, y = t (1 - s); dx dy = (1 - s) ds dt.
            let ns = (d + 2) / 2 + 1;
            let nt = (d + 1) / 2 + 1;
            let (xs, ws) = gauss_legendre(ns);
            let (xt, wt) = gauss_legendre(nt);
            let mut p = Vec::new();
            let mut w = Vec::new();
            for (i, &s) in xs.iter().enumerate() {
                for (j, &t) in xt.iter().enumerate() {
                    p.push([s, t * (1.0 - s)]);
                    w.push(ws[i] * wt[j] * (1.0 - s));
                }
            }
            (p, w, d)
        }
    };
    QuadRule {
        domain: Domain::Triangle,
        points: pts.iter().map(|&[x, y]| Point3::new(x, y, 0.0)).collect(),
        weights: wts,
        exact_degree: exact,
    }
}

fn tet_rule(degree: usize) -> QuadRule {
    let (points, weights, exact) = match degree {
        1 => (
            vec![Point3::new(0.25, 0.25, 0.25)],
            vec![1.0 / 6.0],
            1,
        ),
        2 => {
            let s5 = 5.0f64.sqrt();
            let a = (5.0 + 3.0 * s5) / 20.0;
            let b = (5.0 - s5) / 20.0;
            let pts = vec![
                Point3::new(a, b, b),
                Point3::new(b, a, b),
                Point3::new(b, b, a),
                Point3::new(b, b, b),
            ];
            (pts, vec![1.0 / 24.0; 4], 2)
        }
        d => {
            // x = s, y = t (1 - s), z = u (1 - s)(1 - t);
            // dx dy dz = (1 - s)^2 (1 - t) ds dt du.
            let ns = (d + 3) / 2 + 1;
            let nt = (d + 2) / 2 + 1;
            let nu = (d + 1) / 2 + 1;
            let (xs, ws) = gauss_legendre(ns);
            let (xt, wt) = gauss_legendre(nt);
            let (xu, wu) = gauss_legendre(nu);
            let mut pts = Vec::new();
            let mut w = Vec::new();
            for (i, &s) in xs.iter().enumerate() {
                for (j, &t) in xt.iter().enumerate() {
                    for (k, &u) in xu.iter().enumerate() {
                        pts.push(Point3::new(s, t * (1.0 - s), u * (1.0 - s) * (1.0 - t)));
                        w.push(ws[i] * wt[j] * wu[k] * (1.0 - s) * (1.0 - s) * (1.0 - t));
                    }
                }
            }
            (pts, w, d)
        }
    };
    QuadRule {
        domain: Domain::Tet,
        points,
        weights,
        exact_degree: exact,
    }
}

/// Union of the tetrahedral rule mapped onto the two sub-tetrahedra of the
/// reference pyramid, with Jacobian-scaled weights.
fn pyramid_rule(degree: usize) -> QuadRule {
    let tet = tet_rule(degree);
    let mut points = Vec::with_capacity(2 * tet.points.len());
    let mut weights = Vec::with_capacity(2 * tet.weights.len());
    let pyr = crate::refgeom::ElemKind::Pyramid.reference_vertices();
    for sub in [SubTetId::T1, SubTetId::T2] {
        let vs: Vec<Point3> = sub.vertex_permutation().iter().map(|&i| pyr[i]).collect();
        let a = Mat3::from_columns(&[vs[1] - vs[0], vs[2] - vs[0], vs[3] - vs[0]]);
        let det = a.determinant().abs();
        for (p, w) in tet.points.iter().zip(&tet.weights) {
            points.push(vs[0] + a * p.coords);
            weights.push(w * det);
        }
    }
    QuadRule {
        domain: Domain::Pyramid,
        points,
        weights,
        exact_degree: tet.exact_degree,
    }
}

/// Rule for integrating over one sub-tetrahedron of the reference pyramid.
pub(crate) fn subtet_rule(sub: SubTetId, degree: usize) -> QuadRule {
    let tet = tet_rule(degree.clamp(1, MAX_DEGREE));
    let pyr = crate::refgeom::ElemKind::Pyramid.reference_vertices();
    let vs: Vec<Point3> = sub.vertex_permutation().iter().map(|&i| pyr[i]).collect();
    let a = Mat3::from_columns(&[vs[1] - vs[0], vs[2] - vs[0], vs[3] - vs[0]]);
    let det = a.determinant().abs();
    QuadRule {
        domain: Domain::Tet,
        points: tet.points.iter().map(|p| vs[0] + a * p.coords).collect(),
        weights: tet.weights.iter().map(|w| w * det).collect(),
        exact_degree: tet.exact_degree,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// Exact monomial integrals per domain (simplex factorial formula;
    /// z-slab integration for the pyramid).
    fn exact_monomial(domain: Domain, e: [u32; 3]) -> f64 {
        let seg = |k: u32| 1.0 / f64::from(k + 1);
        match domain {
            Domain::Segment => seg(e[0]),
            Domain::Quad => seg(e[0]) * seg(e[1]),
            Domain::Hex => seg(e[0]) * seg(e[1]) * seg(e[2]),
            Domain::Triangle => {
                factorial(e[0]) * factorial(e[1]) / factorial(e[0] + e[1] + 2)
            }
            Domain::Tet => {
                factorial(e[0]) * factorial(e[1]) * factorial(e[2])
                    / factorial(e[0] + e[1] + e[2] + 3)
            }
            Domain::Pyramid => {
                // At height z the cross-section is [z/2, 1-z/2]^2.
                let slab = |k: u32, z: f64| {
                    ((1.0 - z / 2.0).powi(k as i32 + 1) - (z / 2.0).powi(k as i32 + 1))
                        / f64::from(k + 1)
                };
                let (x, w) = gauss_legendre(12);
                x.iter()
                    .zip(&w)
                    .map(|(&z, &wz)| wz * z.powi(e[2] as i32) * slab(e[0], z) * slab(e[1], z))
                    .sum()
            }
        }
    }

    #[test]
    fn weights_sum_to_measure_and_are_positive() {
        for domain in [
            Domain::Segment,
            Domain::Triangle,
            Domain::Quad,
            Domain::Tet,
            Domain::Hex,
            Domain::Pyramid,
        ] {
            for degree in 1..=MAX_DEGREE {
                let rule = rule_for(domain, degree).unwrap();
                assert!(rule.weights.iter().all(|&w| w > 0.0), "{domain:?} d{degree}");
                let total: f64 = rule.weights.iter().sum();
                assert_abs_diff_eq!(total, domain.measure(), epsilon = 1e-14);
                assert!(rule.exact_degree >= degree);
            }
        }
    }

    #[test]
    fn monomial_exactness_sweep() {
        for domain in [
            Domain::Segment,
            Domain::Triangle,
            Domain::Quad,
            Domain::Tet,
            Domain::Hex,
            Domain::Pyramid,
        ] {
            for degree in 1..=MAX_DEGREE {
                let rule = rule_for(domain, degree).unwrap();
                let d = rule.exact_degree as u32;
                for ex in 0..=d {
                    for ey in 0..=(d - ex) {
                        for ez in 0..=(d - ex - ey) {
                            let dim_ok = match domain {
                                Domain::Segment => ey == 0 && ez == 0,
                                Domain::Triangle | Domain::Quad => ez == 0,
                                _ => true,
                            };
                            if !dim_ok {
                                continue;
                            }
                            let got = integrate(&rule, |p| {
                                p.x.powi(ex as i32) * p.y.powi(ey as i32) * p.z.powi(ez as i32)
                            });
                            let want = exact_monomial(domain, [ex, ey, ez]);
                            let tol = 1e-13 * want.abs().max(1e-3);
                            assert!(
                                (got - want).abs() <= tol,
                                "{domain:?} d{degree} x^{ex} y^{ey} z^{ez}: {got} vs {want}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn reference_volumes() {
        let tet = rule_for(Domain::Tet, 3).unwrap();
        assert_abs_diff_eq!(integrate(&tet, |_| 1.0), 1.0 / 6.0, epsilon = 1e-15);
        let pyr = rule_for(Domain::Pyramid, 2).unwrap();
        assert_abs_diff_eq!(integrate(&pyr, |_| 1.0), 1.0 / 3.0, epsilon = 1e-15);
        let hex = rule_for(Domain::Hex, 4).unwrap();
        assert_abs_diff_eq!(integrate(&hex, |_| 3.7), 3.7, epsilon = 1e-14);
    }

    #[test]
    fn two_point_gauss_on_segment() {
        let rule = rule_for(Domain::Segment, 3).unwrap();
        assert_eq!(rule.points.len(), 2);
        assert_abs_diff_eq!(integrate(&rule, |p| p.x * p.x), 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn simplex_monomial_example() {
        // lambda_1 lambda_2 = x y on the reference tet has integral 1/120.
        let rule = rule_for(Domain::Tet, 4).unwrap();
        assert_abs_diff_eq!(integrate(&rule, |p| p.x * p.y), 1.0 / 120.0, epsilon = 1e-16);
    }

    #[test]
    fn pyramid_rule_integrates_separable_products_like_the_slab_oracle() {
        let rule = rule_for(Domain::Pyramid, 6).unwrap();
        // p(z) q(x, y) with p, q polynomial
        let f = |p: &Point3| (1.0 + p.z + p.z * p.z) * (p.x * p.x + 0.5 * p.x * p.y - p.y);
        let got = integrate(&rule, f);
        let want: f64 = [
            (1.0, [2, 0, 0]),
            (0.5, [1, 1, 0]),
            (-1.0, [0, 1, 0]),
            (1.0, [2, 0, 1]),
            (0.5, [1, 1, 1]),
            (-1.0, [0, 1, 1]),
            (1.0, [2, 0, 2]),
            (0.5, [1, 1, 2]),
            (-1.0, [0, 1, 2]),
        ]
        .iter()
        .map(|&(c, e): &(f64, [u32; 3])| c * exact_monomial(Domain::Pyramid, e))
        .sum();
        assert_abs_diff_eq!(got, want, epsilon = 1e-14);
    }

    #[test]
    fn degree_out_of_range() {
        assert!(matches!(
            rule_for(Domain::Tet, 0),
            Err(Error::DegreeOutOfRange { .. })
        ));
        assert!(matches!(
            rule_for(Domain::Tet, 11),
            Err(Error::DegreeOutOfRange { .. })
        ));
    }
}
