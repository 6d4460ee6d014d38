//! Trivariate polynomials with f64 coefficients, used to store shape
//! functions and their exact derivatives.

use crate::{Point3, Vec3};

/// Sparse trivariate polynomial: sum of `coef * x^e0 * y^e1 * z^e2`.
#[derive(Clone, Debug, Default, PartialEq)]
pub(crate) struct Poly {
    terms: Vec<(f64, [u8; 3])>,
}

impl Poly {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Self::from_terms(vec![(c, [0, 0, 0])])
    }

    /// `c0 + g.x * x + g.y * y + g.z * z`
    pub fn affine(c0: f64, g: Vec3) -> Self {
        Self::from_terms(vec![
            (c0, [0, 0, 0]),
            (g.x, [1, 0, 0]),
            (g.y, [0, 1, 0]),
            (g.z, [0, 0, 1]),
        ])
    }

    pub fn from_terms(terms: Vec<(f64, [u8; 3])>) -> Self {
        let mut p = Self { terms };
        p.compact();
        p
    }

    fn compact(&mut self) {
        self.terms.sort_by_key(|&(_, e)| e);
        let mut out: Vec<(f64, [u8; 3])> = Vec::with_capacity(self.terms.len());
        for &(c, e) in &self.terms {
            match out.last_mut() {
                Some(last) if last.1 == e => last.0 += c,
                _ => out.push((c, e)),
            }
        }
        out.retain(|&(c, _)| c != 0.0);
        self.terms = out;
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        Poly::from_terms(terms)
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly::from_terms(self.terms.iter().map(|&(c, e)| (c * s, e)).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for &(a, ea) in &self.terms {
            for &(b, eb) in &other.terms {
                terms.push((a * b, [ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2]]));
            }
        }
        Poly::from_terms(terms)
    }

    pub fn partial(&self, axis: usize) -> Poly {
        let terms = self
            .terms
            .iter()
            .filter(|&&(_, e)| e[axis] > 0)
            .map(|&(c, e)| {
                let mut d = e;
                d[axis] -= 1;
                (c * f64::from(e[axis]), d)
            })
            .collect();
        Poly::from_terms(terms)
    }

    pub fn gradient(&self) -> VPoly {
        VPoly([self.partial(0), self.partial(1), self.partial(2)])
    }

    pub fn eval(&self, p: &Point3) -> f64 {
        self.terms
            .iter()
            .map(|&(c, e)| {
                c * p.x.powi(i32::from(e[0]))
                    * p.y.powi(i32::from(e[1]))
                    * p.z.powi(i32::from(e[2]))
            })
            .sum()
    }
}

/// A polynomial vector field, one `Poly` per Cartesian component.
#[derive(Clone, Debug, Default, PartialEq)]
pub(crate) struct VPoly(pub [Poly; 3]);

impl VPoly {
    pub fn zero() -> Self {
        Self([Poly::zero(), Poly::zero(), Poly::zero()])
    }

    /// `p * v` for a constant vector `v`.
    pub fn scaled_vec(p: &Poly, v: Vec3) -> Self {
        Self([p.scale(v.x), p.scale(v.y), p.scale(v.z)])
    }

    pub fn add(&self, other: &VPoly) -> VPoly {
        VPoly([
            self.0[0].add(&other.0[0]),
            self.0[1].add(&other.0[1]),
            self.0[2].add(&other.0[2]),
        ])
    }

    pub fn sub(&self, other: &VPoly) -> VPoly {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> VPoly {
        VPoly([self.0[0].scale(s), self.0[1].scale(s), self.0[2].scale(s)])
    }

    pub fn curl(&self) -> VPoly {
        VPoly([
            self.0[2].partial(1).sub(&self.0[1].partial(2)),
            self.0[0].partial(2).sub(&self.0[2].partial(0)),
            self.0[1].partial(0).sub(&self.0[0].partial(1)),
        ])
    }

    pub fn divergence(&self) -> Poly {
        self.0[0]
            .partial(0)
            .add(&self.0[1].partial(1))
            .add(&self.0[2].partial(2))
    }

    pub fn eval(&self, p: &Point3) -> Vec3 {
        Vec3::new(self.0[0].eval(p), self.0[1].eval(p), self.0[2].eval(p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_and_derivatives() {
        // p = x^2 y + 3 z
        let p = Poly::from_terms(vec![(1.0, [2, 1, 0]), (3.0, [0, 0, 1])]);
        let at = Point3::new(2.0, 0.5, -1.0);
        assert_eq!(p.eval(&at), 4.0 * 0.5 - 3.0);
        assert_eq!(p.partial(0).eval(&at), 2.0 * 2.0 * 0.5);
        assert_eq!(p.partial(1).eval(&at), 4.0);
        assert_eq!(p.partial(2).eval(&at), 3.0);

        let q = Poly::affine(1.0, Vec3::new(0.0, -1.0, 0.0));
        let pq = p.mul(&q);
        assert!((pq.eval(&at) - p.eval(&at) * q.eval(&at)).abs() < 1e-15);
    }

    #[test]
    fn curl_of_gradient_vanishes() {
        let p = Poly::from_terms(vec![(2.0, [1, 1, 1]), (1.0, [0, 2, 0]), (-0.5, [2, 0, 1])]);
        let c = p.gradient().curl();
        assert_eq!(c, VPoly::zero());
    }

    #[test]
    fn divergence_of_curl_vanishes() {
        let v = VPoly([
            Poly::from_terms(vec![(1.0, [0, 2, 1])]),
            Poly::from_terms(vec![(-2.0, [1, 0, 1])]),
            Poly::from_terms(vec![(0.7, [2, 1, 0])]),
        ]);
        assert_eq!(v.curl().divergence(), Poly::zero());
    }
}
