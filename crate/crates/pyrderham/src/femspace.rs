//! Physical elements via the four pullbacks, nodal interpolation, local
//! discrete derivative matrices, and the element-level exactness and
//! commuting checks.
//!
//! Fields transform between a physical element and its reference element by
//! the standard maps: composition for H¹, the covariant Piola map for
//! H(curl), the contravariant Piola map for H(div) and the Jacobian-weighted
//! map for L². Interpolation applies the reference DOFs to the pulled-back
//! field; evaluation pushes the reference expansion forward again. All maps
//! evaluate `F_K`, `J_K` per point, as required for trilinear hexahedra and
//! composite pyramids.

use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;

use crate::dof::{
    dof_set, DofQuadrature, FieldRef, RefScalarField, RefVectorField, VectorFieldWithDiv,
};
use crate::refbasis::{basis_cached, SpaceKind, Value};
use crate::refgeom::{ElemKind, ElementMap};
use crate::{Error, Point3, Result, Vec3};

type ScalarEval = Arc<dyn Fn(&Point3) -> f64 + Send + Sync>;
type VectorEval = Arc<dyn Fn(&Point3) -> Vec3 + Send + Sync>;

/// A scalar physical field with an optional analytic gradient.
#[derive(Clone)]
pub struct ScalarField {
    pub value: ScalarEval,
    pub gradient: Option<VectorEval>,
}

impl ScalarField {
    pub fn new(value: impl Fn(&Point3) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            value: Arc::new(value),
            gradient: None,
        }
    }

    pub fn with_gradient(mut self, g: impl Fn(&Point3) -> Vec3 + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(g));
        self
    }
}

/// A vector physical field with optional analytic curl and divergence.
#[derive(Clone)]
pub struct VectorField {
    pub value: VectorEval,
    pub curl: Option<VectorEval>,
    pub divergence: Option<ScalarEval>,
}

impl VectorField {
    pub fn new(value: impl Fn(&Point3) -> Vec3 + Send + Sync + 'static) -> Self {
        Self {
            value: Arc::new(value),
            curl: None,
            divergence: None,
        }
    }

    pub fn with_curl(mut self, c: impl Fn(&Point3) -> Vec3 + Send + Sync + 'static) -> Self {
        self.curl = Some(Arc::new(c));
        self
    }

    pub fn with_divergence(mut self, d: impl Fn(&Point3) -> f64 + Send + Sync + 'static) -> Self {
        self.divergence = Some(Arc::new(d));
        self
    }
}

/// A physical field of either arity.
#[derive(Clone)]
pub enum FieldFn {
    Scalar(ScalarField),
    Vector(VectorField),
}

impl FieldFn {
    pub fn scalar(value: impl Fn(&Point3) -> f64 + Send + Sync + 'static) -> Self {
        FieldFn::Scalar(ScalarField::new(value))
    }

    pub fn vector(value: impl Fn(&Point3) -> Vec3 + Send + Sync + 'static) -> Self {
        FieldFn::Vector(VectorField::new(value))
    }

    pub fn eval(&self, p: &Point3) -> Value {
        match self {
            FieldFn::Scalar(f) => Value::Scalar((f.value)(p)),
            FieldFn::Vector(f) => Value::Vector((f.value)(p)),
        }
    }

    /// Analytic derivative value (gradient / curl / divergence) of the
    /// field interpreted as a member of `space`.
    pub fn derivative_value(&self, space: SpaceKind, p: &Point3) -> Result<Value> {
        match (space, self) {
            (SpaceKind::H1, FieldFn::Scalar(f)) => f
                .gradient
                .as_ref()
                .map(|g| Value::Vector(g(p)))
                .ok_or(Error::ArityMismatch),
            (SpaceKind::HCurl, FieldFn::Vector(f)) => f
                .curl
                .as_ref()
                .map(|c| Value::Vector(c(p)))
                .ok_or(Error::ArityMismatch),
            (SpaceKind::HDiv, FieldFn::Vector(f)) => f
                .divergence
                .as_ref()
                .map(|d| Value::Scalar(d(p)))
                .ok_or(Error::ArityMismatch),
            _ => Err(Error::ArityMismatch),
        }
    }

    /// The exterior derivative relevant to `space`, as a field usable for
    /// interpolation into the next space. Requires the analytic derivative.
    pub fn derivative_field(&self, space: SpaceKind) -> Result<FieldFn> {
        match (space, self) {
            (SpaceKind::H1, FieldFn::Scalar(f)) => {
                let g = f.gradient.clone().ok_or(Error::ArityMismatch)?;
                // curl grad = 0
                Ok(FieldFn::Vector(VectorField {
                    value: g,
                    curl: Some(Arc::new(|_| Vec3::zeros())),
                    divergence: None,
                }))
            }
            (SpaceKind::HCurl, FieldFn::Vector(f)) => {
                let c = f.curl.clone().ok_or(Error::ArityMismatch)?;
                // div curl = 0
                Ok(FieldFn::Vector(VectorField {
                    value: c,
                    curl: None,
                    divergence: Some(Arc::new(|_| 0.0)),
                }))
            }
            (SpaceKind::HDiv, FieldFn::Vector(f)) => {
                let d = f.divergence.clone().ok_or(Error::ArityMismatch)?;
                Ok(FieldFn::Scalar(ScalarField {
                    value: d,
                    gradient: None,
                }))
            }
            _ => Err(Error::ArityMismatch),
        }
    }
}

/// H¹ / L² pullback of a scalar field onto the reference element.
pub struct PulledScalar<'a> {
    space: SpaceKind,
    map: &'a ElementMap,
    field: &'a ScalarField,
}

impl RefScalarField for PulledScalar<'_> {
    fn eval(&self, p: &Point3) -> f64 {
        let x = self.map.map_point(p);
        match self.space {
            SpaceKind::H1 => (self.field.value)(&x),
            SpaceKind::L2 => {
                let (_, j) = self.map.jacobian_unchecked(p);
                j * (self.field.value)(&x)
            }
            _ => unreachable!(),
        }
    }
}

/// H(curl) / H(div) pullback of a vector field onto the reference element.
pub struct PulledVector<'a> {
    space: SpaceKind,
    map: &'a ElementMap,
    field: &'a VectorField,
}

impl RefVectorField for PulledVector<'_> {
    fn eval(&self, p: &Point3) -> Vec3 {
        let x = self.map.map_point(p);
        let v = (self.field.value)(&x);
        let (f, j) = self.map.jacobian_unchecked(p);
        match self.space {
            SpaceKind::HCurl => f.transpose() * v,
            SpaceKind::HDiv => {
                let finv = f.try_inverse().expect("singular Jacobian in H(div) pullback");
                finv * v * j
            }
            _ => unreachable!(),
        }
    }

    fn divergence(&self, p: &Point3) -> f64 {
        debug_assert_eq!(self.space, SpaceKind::HDiv);
        match &self.field.divergence {
            // Piola identity: the reference divergence of the pullback is J
            // times the physical divergence composed with the map.
            Some(d) => {
                let (_, j) = self.map.jacobian_unchecked(p);
                j * d(&self.map.map_point(p))
            }
            None => crate::dof::fd_divergence(self, p),
        }
    }
}

/// Pullback of a physical field, ready for DOF application.
pub enum PulledField<'a> {
    Scalar(PulledScalar<'a>),
    Vector(PulledVector<'a>),
}

impl PulledField<'_> {
    pub fn eval(&self, p: &Point3) -> Value {
        match self {
            PulledField::Scalar(f) => Value::Scalar(f.eval(p)),
            PulledField::Vector(f) => Value::Vector(f.eval(p)),
        }
    }

    pub fn as_field_ref(&self) -> FieldRef<'_> {
        match self {
            PulledField::Scalar(f) => FieldRef::Scalar(f),
            PulledField::Vector(f) => FieldRef::Vector(f),
        }
    }
}

/// Pull a physical field onto the reference element of `map` with the
/// transformation of `space`.
pub fn pullback<'a>(
    space: SpaceKind,
    map: &'a ElementMap,
    field: &'a FieldFn,
) -> Result<PulledField<'a>> {
    match (space, field) {
        (SpaceKind::H1 | SpaceKind::L2, FieldFn::Scalar(f)) => {
            Ok(PulledField::Scalar(PulledScalar { space, map, field: f }))
        }
        (SpaceKind::HCurl | SpaceKind::HDiv, FieldFn::Vector(f)) => {
            Ok(PulledField::Vector(PulledVector { space, map, field: f }))
        }
        _ => Err(Error::ArityMismatch),
    }
}

/// Element-local nodal interpolant: DOF coefficients against the reference
/// basis, evaluated through the pushforward of `space`.
#[derive(Clone, Debug)]
pub struct LocalInterpolant {
    pub space: SpaceKind,
    pub map: ElementMap,
    pub coefficients: Vec<f64>,
}

impl LocalInterpolant {
    pub fn from_coefficients(space: SpaceKind, map: ElementMap, coefficients: Vec<f64>) -> Self {
        debug_assert_eq!(coefficients.len(), space.dimension(map.kind()));
        Self {
            space,
            map,
            coefficients,
        }
    }

    /// Reference-domain expansion value (no pushforward).
    pub fn eval_reference(&self, p: &Point3) -> Value {
        let basis = basis_cached(self.space, self.map.kind());
        if self.space.is_vector_valued() {
            let mut acc = Vec3::zeros();
            for (c, s) in self.coefficients.iter().zip(&basis.shapes) {
                acc += s.vector_at(p) * *c;
            }
            Value::Vector(acc)
        } else {
            Value::Scalar(
                self.coefficients
                    .iter()
                    .zip(&basis.shapes)
                    .map(|(c, s)| c * s.scalar_at(p))
                    .sum(),
            )
        }
    }

    /// Physical value at a reference point (pushforward of the expansion).
    pub fn eval(&self, p: &Point3) -> Result<Value> {
        let w = self.eval_reference(p);
        let (f, j) = self.map.jacobian(p)?;
        Ok(match (self.space, w) {
            (SpaceKind::H1, v @ Value::Scalar(_)) => v,
            (SpaceKind::L2, Value::Scalar(s)) => Value::Scalar(s / j),
            (SpaceKind::HCurl, Value::Vector(v)) => {
                Value::Vector(f.try_inverse().unwrap().transpose() * v)
            }
            (SpaceKind::HDiv, Value::Vector(v)) => Value::Vector(f * v / j),
            _ => unreachable!(),
        })
    }

    /// Physical exterior derivative at a reference point, via the commuted
    /// pushforward (`F^{-T} grad`, `F curl / J`, `div / J`).
    pub fn eval_derivative(&self, p: &Point3) -> Result<Value> {
        let basis = basis_cached(self.space, self.map.kind());
        let (f, j) = self.map.jacobian(p)?;
        match self.space {
            SpaceKind::H1 => {
                let mut g = Vec3::zeros();
                for (c, s) in self.coefficients.iter().zip(&basis.shapes) {
                    g += s.eval_derivative(p)?.vector() * *c;
                }
                Ok(Value::Vector(f.try_inverse().unwrap().transpose() * g))
            }
            SpaceKind::HCurl => {
                let mut cu = Vec3::zeros();
                for (c, s) in self.coefficients.iter().zip(&basis.shapes) {
                    cu += s.eval_derivative(p)?.vector() * *c;
                }
                Ok(Value::Vector(f * cu / j))
            }
            SpaceKind::HDiv => {
                let mut d = 0.0;
                for (c, s) in self.coefficients.iter().zip(&basis.shapes) {
                    d += s.eval_derivative(p)?.scalar() * *c;
                }
                Ok(Value::Scalar(d / j))
            }
            SpaceKind::L2 => Err(Error::UnsupportedDerivative),
        }
    }
}

/// Nodal interpolation with the default DOF quadrature.
pub fn interpolate(space: SpaceKind, map: &ElementMap, field: &FieldFn) -> Result<LocalInterpolant> {
    interpolate_with(space, map, field, &DofQuadrature::default())
}

/// Nodal interpolation: coefficients are the reference DOFs of the
/// pulled-back field.
pub fn interpolate_with(
    space: SpaceKind,
    map: &ElementMap,
    field: &FieldFn,
    q: &DofQuadrature,
) -> Result<LocalInterpolant> {
    let dofs = dof_set(space, map.kind());
    let pulled = pullback(space, map, field)?;
    let coefficients = match pulled.as_field_ref() {
        FieldRef::Scalar(f) => dofs.apply_scalar(f, q)?,
        FieldRef::Vector(f) => dofs.apply_vector(f, q)?,
    };
    Ok(LocalInterpolant {
        space,
        map: map.clone(),
        coefficients,
    })
}

/// Local discrete derivative matrix: target DOFs applied to derivatives of
/// source shapes.
#[derive(Clone, Debug)]
pub struct LocalDerivativeMatrix {
    pub from: SpaceKind,
    pub to: SpaceKind,
    pub elem_kind: ElemKind,
    pub matrix: DMatrix<f64>,
}

/// Build the derivative matrix for `from` on `kind` (entry `(i, j)` is
/// `N_i^{to}(d shape_j^{from})` on the reference element).
pub fn derivative_matrix(from: SpaceKind, kind: ElemKind) -> Result<LocalDerivativeMatrix> {
    let to = from.next().ok_or(Error::UnsupportedDerivative)?;
    let q = DofQuadrature::default();
    let src = basis_cached(from, kind);
    let dofs = dof_set(to, kind);
    let mut matrix = DMatrix::zeros(dofs.len(), src.len());
    for (j, shape) in src.shapes.iter().enumerate() {
        let col: Vec<f64> = match from {
            SpaceKind::H1 => {
                let grad = |p: &Point3| shape.eval_derivative(p).unwrap().vector();
                dofs.apply_vector(&grad, &q)?
            }
            SpaceKind::HCurl => {
                let field = VectorFieldWithDiv {
                    value: |p: &Point3| shape.eval_derivative(p).unwrap().vector(),
                    div: |_: &Point3| 0.0,
                };
                dofs.apply_vector(&field, &q)?
            }
            SpaceKind::HDiv => {
                let div = |p: &Point3| shape.eval_derivative(p).unwrap().scalar();
                dofs.apply_scalar(&div, &q)?
            }
            SpaceKind::L2 => unreachable!(),
        };
        for i in 0..dofs.len() {
            matrix[(i, j)] = col[i];
        }
    }
    Ok(LocalDerivativeMatrix {
        from,
        to,
        elem_kind: kind,
        matrix,
    })
}

/// Cached derivative matrices (one per `from`-space and element kind).
pub fn derivative_matrix_cached(from: SpaceKind, kind: ElemKind) -> &'static LocalDerivativeMatrix {
    static CACHE: OnceLock<Vec<LocalDerivativeMatrix>> = OnceLock::new();
    let all = CACHE.get_or_init(|| {
        let mut v = Vec::new();
        for from in [SpaceKind::H1, SpaceKind::HCurl, SpaceKind::HDiv] {
            for kind in [ElemKind::Tet, ElemKind::Hex, ElemKind::Pyramid] {
                v.push(derivative_matrix(from, kind).unwrap());
            }
        }
        v
    });
    all.iter()
        .find(|m| m.from == from && m.elem_kind == kind)
        .expect("no derivative matrix from L2")
}

/// Numeric rank by singular-value thresholding relative to the largest
/// singular value.
pub fn numeric_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let svd = m.clone().svd(false, false);
    let max = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    if max == 0.0 {
        return 0;
    }
    svd.singular_values.iter().filter(|&&s| s > rel_tol * max).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::samples;
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn identity_map_pullbacks_leave_fields_unchanged() {
        let mut rng = StdRng::seed_from_u64(1);
        for kind in [ElemKind::Tet, ElemKind::Hex, ElemKind::Pyramid] {
            let map = ElementMap::reference(kind);
            let sf = FieldFn::scalar(|p: &Point3| 1.0 + p.x - 2.0 * p.y * p.z);
            let vf = FieldFn::vector(|p: &Point3| Vec3::new(p.y, p.z * p.x, 1.0 - p.x));
            for space in SpaceKind::ALL {
                let field = if space.is_vector_valued() { &vf } else { &sf };
                let pulled = pullback(space, &map, field).unwrap();
                for _ in 0..20 {
                    let p = samples::point_in(kind, &mut rng);
                    let diff = pulled.eval(&p).sub(field.eval(&p));
                    assert!(diff.abs_max() <= 1e-14);
                }
            }
        }
    }

    #[test]
    fn hdiv_pullback_of_a_constant_is_constant_on_affine_tets() {
        let mut rng = StdRng::seed_from_u64(2);
        let map = samples::random_affine_tet(&mut rng);
        let c = Vec3::new(0.4, -1.2, 0.9);
        let field = FieldFn::vector(move |_| c);
        let pulled = pullback(SpaceKind::HDiv, &map, &field).unwrap();
        let v0 = pulled.eval(&samples::point_in(ElemKind::Tet, &mut rng)).vector();
        for _ in 0..10 {
            let p = samples::point_in(ElemKind::Tet, &mut rng);
            assert!((pulled.eval(&p).vector() - v0).amax() <= 1e-13);
        }
        // J F^{-1} c for the affine map
        let (f, j) = map.jacobian(&Point3::new(0.25, 0.25, 0.25)).unwrap();
        let want = f.try_inverse().unwrap() * c * j;
        assert!((v0 - want).amax() <= 1e-13);
    }

    #[test]
    fn hcurl_pullback_of_a_gradient_is_the_reference_gradient() {
        // F^T (grad v)(Phi(x)) = grad_ref (v o Phi), checked with central
        // finite differences of the composition.
        let mut rng = StdRng::seed_from_u64(3);
        let v = |p: &Point3| (1.3 * p.x - 0.7 * p.y + 0.2 * p.z).sin() + p.x * p.y;
        let grad_v = |p: &Point3| {
            let c = (1.3 * p.x - 0.7 * p.y + 0.2 * p.z).cos();
            Vec3::new(1.3 * c + p.y, -0.7 * c + p.x, 0.2 * c)
        };
        let field = FieldFn::vector(grad_v);
        for map in [
            samples::random_affine_tet(&mut rng),
            samples::random_hex(&mut rng, 0.12),
            samples::random_pyramid(&mut rng, 0.12),
        ] {
            let pulled = pullback(SpaceKind::HCurl, &map, &field).unwrap();
            let h = 1e-6;
            for _ in 0..20 {
                let p = samples::interior_point(map.kind(), &mut rng, 10.0 * h);
                let got = pulled.eval(&p).vector();
                for axis in 0..3 {
                    let mut hi = p;
                    let mut lo = p;
                    hi[axis] += h;
                    lo[axis] -= h;
                    let fd = (v(&map.map_point(&hi)) - v(&map.map_point(&lo))) / (2.0 * h);
                    assert!((got[axis] - fd).abs() <= 1e-6 * got[axis].abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn interpolation_reproduces_linear_coordinates_on_the_pyramid() {
        let map = ElementMap::reference(ElemKind::Pyramid);
        let field = FieldFn::scalar(|p: &Point3| p.x);
        let u = interpolate(SpaceKind::H1, &map, &field).unwrap();
        let mut rng = StdRng::seed_from_u64(4);
        for _ in 0..30 {
            let p = samples::point_in(ElemKind::Pyramid, &mut rng);
            assert_abs_diff_eq!(u.eval(&p).unwrap().scalar(), p.x, epsilon = 1e-13);
        }
    }

    #[test]
    fn quadratic_height_interpolates_to_the_apex_shape() {
        let map = ElementMap::reference(ElemKind::Pyramid);
        let field = FieldFn::scalar(|p: &Point3| p.z * p.z);
        let u = interpolate(SpaceKind::H1, &map, &field).unwrap();
        let want = [0.0, 0.0, 0.0, 0.0, 1.0];
        for (c, w) in u.coefficients.iter().zip(want) {
            assert_abs_diff_eq!(*c, w, epsilon = 1e-14);
        }
    }

    #[test]
    fn reproduction_of_contained_polynomial_spaces() {
        // P1 in S(K); constants plus b x x in E(K); constants plus beta x in
        // V(K); P0 in W(K). Exact on affine tets, parallelepipeds and
        // regular pyramids.
        let mut rng = StdRng::seed_from_u64(5);
        for trial in 0..6 {
            let maps = [
                samples::random_affine_tet(&mut rng),
                samples::random_parallelepiped(&mut rng),
                samples::random_regular_pyramid(&mut rng),
            ];
            let a = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let b = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let c0 = rng.gen_range(-1.0..1.0);
            let beta = rng.gen_range(-1.0..1.0);
            let fields = [
                FieldFn::scalar(move |p: &Point3| c0 + a.dot(&p.coords)),
                FieldFn::Vector(
                    VectorField::new(move |p: &Point3| a + b.cross(&p.coords))
                        .with_curl(move |_| b * 2.0),
                ),
                FieldFn::Vector(
                    VectorField::new(move |p: &Point3| a + p.coords * beta)
                        .with_divergence(move |_| 3.0 * beta),
                ),
                FieldFn::scalar(move |_: &Point3| c0),
            ];
            for (space, field) in SpaceKind::ALL.iter().zip(&fields) {
                for map in &maps {
                    let u = interpolate(*space, map, field).unwrap();
                    for _ in 0..20 {
                        let p = samples::point_in(map.kind(), &mut rng);
                        let err = u.eval(&p).unwrap().sub(field.eval(&map.map_point(&p)));
                        assert!(
                            err.abs_max() <= 1e-12,
                            "trial {trial}: {space:?} on {:?}: {:.3e}",
                            map.kind(),
                            err.abs_max()
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn rt0_interpolant_has_exact_divergence() {
        let mut rng = StdRng::seed_from_u64(6);
        let map = samples::random_affine_tet(&mut rng);
        let beta = 0.8;
        let field = FieldFn::Vector(
            VectorField::new(move |p: &Point3| Vec3::new(0.3, -0.2, 0.5) + p.coords * beta)
                .with_divergence(move |_| 3.0 * beta),
        );
        let u = interpolate(SpaceKind::HDiv, &map, &field).unwrap();
        for _ in 0..20 {
            let p = samples::point_in(ElemKind::Tet, &mut rng);
            assert_abs_diff_eq!(
                u.eval_derivative(&p).unwrap().scalar(),
                3.0 * beta,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn gradient_of_affine_interpolant_is_exact() {
        let mut rng = StdRng::seed_from_u64(7);
        let g = Vec3::new(0.3, 1.1, -0.4);
        let field = FieldFn::scalar(move |p: &Point3| 2.0 + g.dot(&p.coords));
        for map in [
            samples::random_affine_tet(&mut rng),
            samples::random_hex(&mut rng, 0.1),
            samples::random_pyramid(&mut rng, 0.1),
        ] {
            let u = interpolate(SpaceKind::H1, &map, &field).unwrap();
            for _ in 0..20 {
                let p = samples::point_in(map.kind(), &mut rng);
                assert!((u.eval_derivative(&p).unwrap().vector() - g).amax() <= 1e-12);
            }
        }
    }

    #[test]
    fn pyramid_derivative_matrices_exactness() {
        let g = derivative_matrix(SpaceKind::H1, ElemKind::Pyramid).unwrap();
        let c = derivative_matrix(SpaceKind::HCurl, ElemKind::Pyramid).unwrap();
        let d = derivative_matrix(SpaceKind::HDiv, ElemKind::Pyramid).unwrap();
        assert_eq!(g.matrix.shape(), (8, 5));
        assert_eq!(c.matrix.shape(), (6, 8));
        assert_eq!(d.matrix.shape(), (2, 6));

        // Row 3 (edge e15), column 5 (apex shape): endpoint difference 1.
        assert_abs_diff_eq!(g.matrix[(2, 4)], 1.0, epsilon = 1e-13);

        let cg = &c.matrix * &g.matrix;
        let dc = &d.matrix * &c.matrix;
        assert!(cg.amax() <= 1e-13);
        assert!(dc.amax() <= 1e-13);

        assert_eq!(numeric_rank(&g.matrix, 1e-10), 4);
        assert_eq!(numeric_rank(&c.matrix, 1e-10), 4);
        assert_eq!(numeric_rank(&d.matrix, 1e-10), 2);

        // kernel of grad is the constants
        let ones = nalgebra::DVector::from_element(5, 1.0);
        assert!((&g.matrix * ones).amax() <= 1e-13);
    }

    #[test]
    fn commuting_squares_on_random_elements() {
        let mut rng = StdRng::seed_from_u64(8);
        let mut elements = Vec::new();
        for _ in 0..10 {
            elements.push(samples::random_pyramid(&mut rng, 0.15));
            elements.push(samples::random_hex(&mut rng, 0.15));
            elements.push(samples::random_affine_tet(&mut rng));
        }
        for k in 0..20 {
            let field_h1 = samples::random_quadratic_scalar(&mut rng);
            let field_e = samples::random_linear_vector(&mut rng);
            let field_v = samples::random_rt_vector(&mut rng);
            for map in &elements {
                for (space, field) in [
                    (SpaceKind::H1, &field_h1),
                    (SpaceKind::HCurl, &field_e),
                    (SpaceKind::HDiv, &field_v),
                ] {
                    let r = samples::commuting_residual(space, map, field, 50, &mut rng).unwrap();
                    assert!(
                        r <= 1e-10,
                        "field {k} {space:?} on {:?}: residual {r:.3e}",
                        map.kind()
                    );
                }
            }
        }
    }

    #[test]
    fn piola_divergence_consistency() {
        // The reference divergence of the H(div) pullback equals the L2
        // pullback of the physical divergence. Checked with a 4th-order
        // reference-coordinate stencil against the analytic route.
        let mut rng = StdRng::seed_from_u64(9);
        for _ in 0..5 {
            let maps = [
                samples::random_pyramid(&mut rng, 0.12),
                samples::random_hex(&mut rng, 0.12),
            ];
            let a = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let b = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let w = move |p: &Point3| a * b.dot(&p.coords) + Vec3::new(p.x * p.x, p.y * p.y, 0.0);
            let div_w = move |p: &Point3| a.dot(&b) + 2.0 * p.x + 2.0 * p.y;
            let field = FieldFn::Vector(VectorField::new(w).with_divergence(div_w));
            for map in &maps {
                let pulled = pullback(SpaceKind::HDiv, map, &field).unwrap();
                let pv = match &pulled {
                    PulledField::Vector(v) => v,
                    _ => unreachable!(),
                };
                let h = 1e-3;
                for _ in 0..10 {
                    let p = samples::interior_point(map.kind(), &mut rng, 4.0 * h);
                    let mut fd = 0.0;
                    for axis in 0..3 {
                        let shift = |s: f64| {
                            let mut q = p;
                            q[axis] += s;
                            pv.eval(&q)[axis]
                        };
                        fd += (-shift(2.0 * h) + 8.0 * shift(h) - 8.0 * shift(-h)
                            + shift(-2.0 * h))
                            / (12.0 * h);
                    }
                    let analytic = pv.divergence(&p);
                    assert!(
                        (fd - analytic).abs() <= 1e-11 * analytic.abs().max(1.0),
                        "{:?}: fd {fd} vs {analytic}",
                        map.kind()
                    );
                }
            }
        }
    }

    #[test]
    fn arity_mismatches_propagate() {
        let map = ElementMap::reference(ElemKind::Tet);
        let sf = FieldFn::scalar(|_| 0.0);
        assert!(matches!(
            interpolate(SpaceKind::HCurl, &map, &sf),
            Err(Error::ArityMismatch)
        ));
        let vf = FieldFn::vector(|_| Vec3::zeros());
        assert!(matches!(
            interpolate(SpaceKind::L2, &map, &vf),
            Err(Error::ArityMismatch)
        ));
    }
}
