//! Study harness: the built-in demo THP mesh, manufactured field catalog,
//! convergence-rate studies, element self-test suites and CSV emission.
//!
//! The demo domain is the box `[0,2] x [0,1] x [0,1]`: the left unit cube is
//! one hexahedron, the right unit cube is filled by five pyramids with apex
//! at its centre plus one pyramid (base on the outer face `x = 2`) split
//! into two tetrahedra. This is the smallest mesh exercising every element
//! kind and every inter-kind interface.
//!
//! Convergence studies run on a study base obtained by refining the demo
//! mesh once and displacing its interior vertices by a seeded pseudo-random
//! field (the 8-element demo has a single interior vertex, which leaves
//! every element affine; one refinement creates enough interior vertices to
//! make the hexahedra genuinely non-parallelepiped and the pyramids
//! non-regular). Refinement inside studies uses the shortest-diagonal tet
//! rule so element shapes stay non-degenerate across levels.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::dof::DofQuadrature;
use crate::femspace::{FieldFn, ScalarField, VectorField};
use crate::global::{build_dof_map, interpolate_global, GlobalDofMap, GlobalField};
use crate::mesh::{Element, TetDiagonal, ThpMesh};
use crate::quadrature::{rule_for, Domain};
use crate::refbasis::{SpaceKind, Value};
use crate::refgeom::ElemKind;
use crate::{Error, Point3, Result, Vec3};

/// Default RNG seed; `PYRDERHAM_SEED` overrides it.
pub const DEFAULT_SEED: u64 = 42;

/// Seed from the environment, falling back to [`DEFAULT_SEED`].
pub fn seed_from_env() -> u64 {
    std::env::var("PYRDERHAM_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(DEFAULT_SEED)
}

/// Build the demo THP mesh: 1 hex + 5 pyramids + 2 tets on
/// `[0,2] x [0,1] x [0,1]`. A positive `perturbation` displaces the interior
/// vertices (the right-cube centre) by that fraction of the local mesh size.
pub fn build_demo_thp(perturbation: f64) -> Result<ThpMesh> {
    build_demo_thp_seeded(perturbation, seed_from_env())
}

pub fn build_demo_thp_seeded(perturbation: f64, seed: u64) -> Result<ThpMesh> {
    if !(0.0..0.2).contains(&perturbation) {
        return Err(Error::BadConfig(format!(
            "perturbation {perturbation} outside [0, 0.2)"
        )));
    }
    let mut vertices: Vec<Point3> = Vec::new();
    let find = |p: Point3, vertices: &mut Vec<Point3>| -> usize {
        if let Some(i) = vertices.iter().position(|q| (q - p).norm() <= 1e-12) {
            return i;
        }
        vertices.push(p);
        vertices.len() - 1
    };

    // left cube in the hex node order
    let hex_nodes: Vec<usize> = ElemKind::Hex
        .reference_vertices()
        .iter()
        .map(|v| find(Point3::new(v.x, v.y, v.z), &mut vertices))
        .collect();

    let centre = Point3::new(1.5, 0.5, 0.5);
    let centre_id = find(centre, &mut vertices);

    // faces of the right cube as corner quadruples (any cyclic order)
    let c = |x: f64, y: f64, z: f64| Point3::new(x, y, z);
    let faces = [
        [c(1.0, 0.0, 0.0), c(1.0, 1.0, 0.0), c(1.0, 1.0, 1.0), c(1.0, 0.0, 1.0)],
        [c(2.0, 0.0, 0.0), c(2.0, 1.0, 0.0), c(2.0, 1.0, 1.0), c(2.0, 0.0, 1.0)],
        [c(1.0, 0.0, 0.0), c(2.0, 0.0, 0.0), c(2.0, 0.0, 1.0), c(1.0, 0.0, 1.0)],
        [c(1.0, 1.0, 0.0), c(2.0, 1.0, 0.0), c(2.0, 1.0, 1.0), c(1.0, 1.0, 1.0)],
        [c(1.0, 0.0, 0.0), c(2.0, 0.0, 0.0), c(2.0, 1.0, 0.0), c(1.0, 1.0, 0.0)],
        [c(1.0, 0.0, 1.0), c(2.0, 0.0, 1.0), c(2.0, 1.0, 1.0), c(1.0, 1.0, 1.0)],
    ];

    let mut elements = vec![Element::new(ElemKind::Hex, hex_nodes)];
    for (fi, corners) in faces.iter().enumerate() {
        // order the base so its right-hand normal points to the apex
        let mut base = *corners;
        let n = (base[1] - base[0]).cross(&(base[3] - base[0]));
        let fc = Point3::from(
            (base[0].coords + base[1].coords + base[2].coords + base[3].coords) / 4.0,
        );
        if n.dot(&(centre - fc)) < 0.0 {
            base.swap(1, 3);
        }
        let ids: Vec<usize> = base.iter().map(|&p| find(p, &mut vertices)).collect();
        if fi == 1 {
            // the x = 2 face: split this pyramid into its two
            // sub-tetrahedra along the v1-v3 base diagonal
            elements.push(Element::new(
                ElemKind::Tet,
                vec![ids[2], ids[0], ids[1], centre_id],
            ));
            elements.push(Element::new(
                ElemKind::Tet,
                vec![ids[0], ids[2], ids[3], centre_id],
            ));
        } else {
            let mut nodes = ids;
            nodes.push(centre_id);
            elements.push(Element::new(ElemKind::Pyramid, nodes));
        }
    }
    // put the tets last to match the documented 1 hex + 5 pyr + 2 tet layout
    elements.sort_by_key(|e| match e.kind {
        ElemKind::Hex => 0,
        ElemKind::Pyramid => 1,
        ElemKind::Tet => 2,
    });

    let mesh = ThpMesh::new(vertices, elements)?;
    let report = mesh.validate();
    if !report.is_valid() {
        return Err(Error::InvalidMesh(report.to_string()));
    }
    if perturbation > 0.0 {
        mesh.perturb_interior(perturbation, seed)
    } else {
        Ok(mesh)
    }
}

/// Study base: the demo mesh refined once (shortest-diagonal rule) with all
/// interior vertices displaced by `perturbation` times the local mesh size.
/// One refinement is needed before perturbing because the 8-element demo has
/// a single interior vertex, which cannot bend any hex face or pyramid base.
pub fn build_study_base(perturbation: f64, seed: u64) -> Result<ThpMesh> {
    let base = build_demo_thp_seeded(0.0, seed)?;
    let fine = base.refine_with(TetDiagonal::Shortest)?;
    if perturbation > 0.0 {
        fine.perturb_interior(perturbation, seed)
    } else {
        Ok(fine)
    }
}

/// Named manufactured field for a space: `affine` fields lie in the
/// lowest-order polynomial spaces the elements contain, `trig` fields are
/// smooth non-polynomial fields with analytic derivatives.
pub fn catalog(space: SpaceKind, name: &str) -> Result<FieldFn> {
    let pi = std::f64::consts::PI;
    Ok(match (space, name) {
        (SpaceKind::H1, "affine") => FieldFn::Scalar(
            ScalarField::new(|p: &Point3| 0.3 + 1.2 * p.x - 0.7 * p.y + 0.5 * p.z)
                .with_gradient(|_| Vec3::new(1.2, -0.7, 0.5)),
        ),
        (SpaceKind::H1, "trig") => FieldFn::Scalar(
            ScalarField::new(move |p: &Point3| {
                (pi * p.x / 2.0).sin() * (pi * p.y).sin() * (pi * p.z).sin()
            })
            .with_gradient(move |p: &Point3| {
                let (sx, cx) = ((pi * p.x / 2.0).sin(), (pi * p.x / 2.0).cos());
                let (sy, cy) = ((pi * p.y).sin(), (pi * p.y).cos());
                let (sz, cz) = ((pi * p.z).sin(), (pi * p.z).cos());
                Vec3::new(pi / 2.0 * cx * sy * sz, pi * sx * cy * sz, pi * sx * sy * cz)
            }),
        ),
        (SpaceKind::HCurl, "affine") => FieldFn::Vector(
            VectorField::new(|_| Vec3::new(0.7, -0.4, 1.1)).with_curl(|_| Vec3::zeros()),
        ),
        (SpaceKind::HCurl, "trig") => FieldFn::Vector(
            VectorField::new(move |p: &Point3| {
                Vec3::new(
                    (pi * p.y).sin() * (pi * p.z).sin(),
                    (pi * p.x / 2.0).sin() * (pi * p.z).sin(),
                    (pi * p.x / 2.0).sin() * (pi * p.y).sin(),
                )
            })
            .with_curl(move |p: &Point3| {
                let (sxh, cxh) = ((pi * p.x / 2.0).sin(), (pi * p.x / 2.0).cos());
                let (sy, cy) = ((pi * p.y).sin(), (pi * p.y).cos());
                let (sz, cz) = ((pi * p.z).sin(), (pi * p.z).cos());
                Vec3::new(
                    pi * sxh * cy - pi * sxh * cz,
                    pi * sy * cz - pi / 2.0 * cxh * sy,
                    pi / 2.0 * cxh * sz - pi * cy * sz,
                )
            }),
        ),
        (SpaceKind::HDiv, "affine") => FieldFn::Vector(
            VectorField::new(|p: &Point3| Vec3::new(0.2, -0.5, 0.9) + p.coords * 0.4)
                .with_divergence(|_| 1.2),
        ),
        (SpaceKind::HDiv, "trig") => FieldFn::Vector(
            VectorField::new(move |p: &Point3| {
                Vec3::new(
                    (pi * p.x / 2.0).sin() * (pi * p.y).cos(),
                    (pi * p.y).sin() * (pi * p.z).cos(),
                    (pi * p.z).sin() * (pi * p.x / 2.0).cos(),
                )
            })
            .with_divergence(move |p: &Point3| {
                pi / 2.0 * (pi * p.x / 2.0).cos() * (pi * p.y).cos()
                    + pi * (pi * p.y).cos() * (pi * p.z).cos()
                    + pi * (pi * p.z).cos() * (pi * p.x / 2.0).cos()
            }),
        ),
        (SpaceKind::L2, "affine") => FieldFn::scalar(|_| 0.75),
        (SpaceKind::L2, "trig") => FieldFn::scalar(move |p: &Point3| {
            (pi * p.x / 2.0).sin() * (pi * p.y).sin() * (pi * p.z).sin()
        }),
        (_, other) => {
            return Err(Error::UnknownField {
                space: space.name(),
                field: other.to_string(),
            })
        }
    })
}

/// Source mesh of a study.
#[derive(Clone, Debug, Default)]
pub enum MeshSource {
    /// the built-in demo study base
    #[default]
    Demo,
    /// a mesh file (perturbation applied to its interior vertices)
    File(std::path::PathBuf),
}

/// Configuration of a convergence study.
#[derive(Clone, Debug)]
pub struct StudyConfig {
    pub space: SpaceKind,
    pub field: String,
    pub levels: usize,
    pub mesh: MeshSource,
    /// quadrature degree for error norms (default 8)
    pub error_degree: usize,
    /// quadrature degree override for DOF integrals (default 4)
    pub dof_degree: Option<usize>,
    pub perturbation: f64,
    pub seed: u64,
}

impl StudyConfig {
    pub fn new(space: SpaceKind, field: &str, levels: usize) -> Self {
        Self {
            space,
            field: field.to_string(),
            levels,
            mesh: MeshSource::Demo,
            error_degree: 8,
            dof_degree: None,
            perturbation: 0.1,
            seed: seed_from_env(),
        }
    }
}

/// One row of a convergence study.
#[derive(Clone, Copy, Debug)]
pub struct ErrorRow {
    pub level: usize,
    pub h: f64,
    pub e_l2: f64,
    pub e_deriv: f64,
    pub rate_l2: f64,
    pub rate_deriv: f64,
}

/// Levels, errors and observed rates of one study.
#[derive(Clone, Debug, Default)]
pub struct ErrorReport {
    pub rows: Vec<ErrorRow>,
}

fn fmt_sig12(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.11e}")
    }
}

impl ErrorReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,h,e_l2,e_deriv,rate_l2,rate_deriv\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.level,
                fmt_sig12(r.h),
                fmt_sig12(r.e_l2),
                fmt_sig12(r.e_deriv),
                fmt_sig12(r.rate_l2),
                fmt_sig12(r.rate_deriv)
            );
        }
        out
    }

    /// Observed rates on the finest step.
    pub fn final_rates(&self) -> Option<(f64, f64)> {
        self.rows.last().map(|r| (r.rate_l2, r.rate_deriv))
    }
}

/// L² and derivative-seminorm interpolation errors of a global field
/// against its analytic source, by per-element quadrature of the stated
/// degree. Element contributions are accumulated in element order so the
/// result is independent of the thread count.
pub fn interpolation_errors(
    mesh: &ThpMesh,
    map: &GlobalDofMap,
    field: &FieldFn,
    gfield: &GlobalField,
    degree: usize,
) -> Result<(f64, f64)> {
    let space = map.space;
    let with_deriv = space != SpaceKind::L2;
    let contributions: Vec<(f64, f64)> = (0..mesh.elements.len())
        .into_par_iter()
        .map(|elem| {
            let emap = mesh.element_map(elem);
            let domain = match emap.kind() {
                ElemKind::Tet => Domain::Tet,
                ElemKind::Hex => Domain::Hex,
                ElemKind::Pyramid => Domain::Pyramid,
            };
            let rule = rule_for(domain, degree).expect("degree validated by caller");
            let local = gfield.restrict(mesh, map, elem);
            let mut l2 = 0.0;
            let mut dv = 0.0;
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let (_, j) = emap.jacobian_unchecked(p);
                let x = emap.map_point(p);
                let diff = field.eval(&x).sub(local.eval(p).expect("valid element"));
                let sq = match diff {
                    Value::Scalar(s) => s * s,
                    Value::Vector(v) => v.norm_squared(),
                };
                l2 += w * j * sq;
                if with_deriv {
                    let want = field
                        .derivative_value(space, &x)
                        .expect("catalog fields carry analytic derivatives");
                    let got = local.eval_derivative(p).expect("valid element");
                    let dsq = match want.sub(got) {
                        Value::Scalar(s) => s * s,
                        Value::Vector(v) => v.norm_squared(),
                    };
                    dv += w * j * dsq;
                }
            }
            (l2, dv)
        })
        .collect();
    let (mut l2, mut dv) = (0.0, 0.0);
    for (a, b) in contributions {
        l2 += a;
        dv += b;
    }
    Ok((l2.sqrt(), if with_deriv { dv.sqrt() } else { f64::NAN }))
}

/// Run a convergence study: refine, interpolate, measure, report rates.
pub fn run_convergence(cfg: &StudyConfig) -> Result<ErrorReport> {
    if !(2..=6).contains(&cfg.levels) {
        return Err(Error::BadConfig(format!(
            "levels {} outside 2..=6",
            cfg.levels
        )));
    }
    if !(0.0..0.2).contains(&cfg.perturbation) {
        return Err(Error::BadConfig(format!(
            "perturbation {} outside [0, 0.2)",
            cfg.perturbation
        )));
    }
    let field = catalog(cfg.space, &cfg.field)?;
    let mut mesh = match &cfg.mesh {
        MeshSource::Demo => build_study_base(cfg.perturbation, cfg.seed)?,
        MeshSource::File(path) => {
            let m = ThpMesh::load(path)?;
            if cfg.perturbation > 0.0 {
                m.perturb_interior(cfg.perturbation, cfg.seed)?
            } else {
                m
            }
        }
    };
    let dof_q = cfg
        .dof_degree
        .map(DofQuadrature::with_degree)
        .unwrap_or_default();
    let mut rows: Vec<ErrorRow> = Vec::new();
    for level in 0..cfg.levels {
        if level > 0 {
            mesh = mesh.refine_with(TetDiagonal::Shortest)?;
        }
        let map = build_dof_map(&mesh, cfg.space)?;
        let gfield = interpolate_global(&mesh, &map, &field, &dof_q)?;
        let (e_l2, e_deriv) = interpolation_errors(&mesh, &map, &field, &gfield, cfg.error_degree)?;
        let (rate_l2, rate_deriv) = match rows.last() {
            None => (f64::NAN, f64::NAN),
            Some(prev) => ((prev.e_l2 / e_l2).log2(), (prev.e_deriv / e_deriv).log2()),
        };
        rows.push(ErrorRow {
            level,
            h: mesh.mesh_size(),
            e_l2,
            e_deriv,
            rate_l2,
            rate_deriv,
        });
    }
    Ok(ErrorReport { rows })
}

/// One line of the element self-test matrix.
#[derive(Clone, Debug)]
pub struct CheckLine {
    pub name: String,
    pub max_err: f64,
    pub tol: f64,
}

impl CheckLine {
    pub fn pass(&self) -> bool {
        self.max_err <= self.tol
    }
}

/// Expected ranks of the grad/curl/div matrices per element kind.
pub fn expected_ranks(kind: ElemKind) -> (usize, usize, usize) {
    let dims: Vec<usize> = SpaceKind::ALL.iter().map(|&s| s.dimension(kind)).collect();
    let grad = dims[0] - 1;
    let curl = dims[1] - grad;
    (grad, curl, dims[3])
}

/// Run the per-element-kind duality / exactness / commuting suites and
/// return one pass/fail line each.
pub fn element_checks() -> Vec<CheckLine> {
    use crate::dof::dof_set;
    use crate::femspace::{derivative_matrix_cached, numeric_rank};
    use crate::refbasis::basis_cached;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    let mut lines = Vec::new();
    let q = DofQuadrature::default();
    for kind in [ElemKind::Tet, ElemKind::Hex, ElemKind::Pyramid] {
        for space in SpaceKind::ALL {
            let m = dof_set(space, kind)
                .matrix(basis_cached(space, kind), &q)
                .expect("duality matrix");
            let mut dev = 0.0f64;
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    dev = dev.max((m[(i, j)] - want).abs());
                }
            }
            lines.push(CheckLine {
                name: format!("duality {:>7} on {}", space.name(), kind.name()),
                max_err: dev,
                tol: 1e-12,
            });
        }
    }
    for kind in [ElemKind::Tet, ElemKind::Hex, ElemKind::Pyramid] {
        let g = &derivative_matrix_cached(SpaceKind::H1, kind).matrix;
        let c = &derivative_matrix_cached(SpaceKind::HCurl, kind).matrix;
        let d = &derivative_matrix_cached(SpaceKind::HDiv, kind).matrix;
        let dd = (c * g).amax().max((d * c).amax());
        lines.push(CheckLine {
            name: format!("exactness d.d = 0 on {}", kind.name()),
            max_err: dd,
            tol: 1e-13,
        });
        let (rg, rc, rd) = expected_ranks(kind);
        let rank_err = [
            numeric_rank(g, 1e-10) as f64 - rg as f64,
            numeric_rank(c, 1e-10) as f64 - rc as f64,
            numeric_rank(d, 1e-10) as f64 - rd as f64,
        ]
        .iter()
        .fold(0.0f64, |m, &x| m.max(x.abs()));
        lines.push(CheckLine {
            name: format!("exactness ranks on {}", kind.name()),
            max_err: rank_err,
            tol: 0.0,
        });
    }
    let mut rng = StdRng::seed_from_u64(seed_from_env());
    for kind in [ElemKind::Tet, ElemKind::Hex, ElemKind::Pyramid] {
        let mut residual = 0.0f64;
        for _ in 0..3 {
            let map = match kind {
                ElemKind::Tet => samples::random_affine_tet(&mut rng),
                ElemKind::Hex => samples::random_hex(&mut rng, 0.12),
                ElemKind::Pyramid => samples::random_pyramid(&mut rng, 0.12),
            };
            for _ in 0..5 {
                let fields = [
                    samples::random_quadratic_scalar(&mut rng),
                    samples::random_linear_vector(&mut rng),
                    samples::random_rt_vector(&mut rng),
                ];
                for (space, field) in [SpaceKind::H1, SpaceKind::HCurl, SpaceKind::HDiv]
                    .iter()
                    .zip(&fields)
                {
                    let r = samples::commuting_residual(*space, &map, field, 25, &mut rng)
                        .expect("commuting residual");
                    residual = residual.max(r);
                }
            }
        }
        lines.push(CheckLine {
            name: format!("commuting diagram on {}", kind.name()),
            max_err: residual,
            tol: 1e-10,
        });
    }
    lines
}

/// Random valid elements and polynomial fields shared by the test suites
/// and the CLI self-checks.
pub mod samples {
    use super::*;
    use crate::femspace::{interpolate, LocalInterpolant};
    use crate::refgeom::ElementMap;
    use rand::Rng;

    pub const PI: f64 = std::f64::consts::PI;

    /// Uniform random point inside the reference element.
    pub fn point_in(kind: ElemKind, rng: &mut impl Rng) -> Point3 {
        interior_point(kind, rng, 0.0)
    }

    /// Random reference point at distance `margin` (in coordinates) from
    /// the boundary and the pyramid's diagonal plane.
    pub fn interior_point(kind: ElemKind, rng: &mut impl Rng, margin: f64) -> Point3 {
        loop {
            let p = Point3::new(rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>());
            let ok = match kind {
                ElemKind::Tet => {
                    p.x > margin
                        && p.y > margin
                        && p.z > margin
                        && p.x + p.y + p.z < 1.0 - margin
                }
                ElemKind::Hex => {
                    p.iter().all(|&c| c > margin && c < 1.0 - margin)
                }
                ElemKind::Pyramid => {
                    p.z > margin
                        && p.z < 1.0 - margin
                        && p.x > p.z / 2.0 + margin
                        && p.x < 1.0 - p.z / 2.0 - margin
                        && p.y > p.z / 2.0 + margin
                        && p.y < 1.0 - p.z / 2.0 - margin
                        && (p.x - p.y).abs() > margin
                }
            };
            if ok {
                return p;
            }
        }
    }

    /// Random positively-oriented affine tetrahedron.
    pub fn random_affine_tet(rng: &mut impl Rng) -> ElementMap {
        loop {
            let origin = Point3::new(
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
            );
            let verts: Vec<Point3> = ElemKind::Tet
                .reference_vertices()
                .iter()
                .map(|v| {
                    origin
                        + v.coords
                        + Vec3::new(
                            rng.gen_range(-0.2..0.2),
                            rng.gen_range(-0.2..0.2),
                            rng.gen_range(-0.2..0.2),
                        ) * if v.coords.norm() > 0.0 { 1.0 } else { 0.0 }
                })
                .collect();
            if let Ok(map) = ElementMap::new(ElemKind::Tet, verts) {
                if map.jacobian(&Point3::new(0.25, 0.25, 0.25)).is_ok() {
                    return map;
                }
            }
        }
    }

    /// Random parallelepiped (affine hex).
    pub fn random_parallelepiped(rng: &mut impl Rng) -> ElementMap {
        loop {
            let origin = Point3::new(
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
            );
            let mut axes = [Vec3::zeros(); 3];
            for (k, a) in axes.iter_mut().enumerate() {
                *a = Vec3::zeros();
                a[k] = 1.0;
                *a += Vec3::new(
                    rng.gen_range(-0.25..0.25),
                    rng.gen_range(-0.25..0.25),
                    rng.gen_range(-0.25..0.25),
                );
            }
            let verts: Vec<Point3> = ElemKind::Hex
                .reference_vertices()
                .iter()
                .map(|v| origin + axes[0] * v.x + axes[1] * v.y + axes[2] * v.z)
                .collect();
            let map = ElementMap::new(ElemKind::Hex, verts).unwrap();
            if map.jacobian(&Point3::new(0.5, 0.5, 0.5)).is_ok() {
                return map;
            }
        }
    }

    /// Random trilinear hex: reference cube corners with independent
    /// displacements up to `amount`.
    pub fn random_hex(rng: &mut impl Rng, amount: f64) -> ElementMap {
        loop {
            let verts: Vec<Point3> = ElemKind::Hex
                .reference_vertices()
                .iter()
                .map(|v| {
                    *v + Vec3::new(
                        rng.gen_range(-amount..amount),
                        rng.gen_range(-amount..amount),
                        rng.gen_range(-amount..amount),
                    )
                })
                .collect();
            let map = ElementMap::new(ElemKind::Hex, verts).unwrap();
            if element_is_valid(&map) {
                return map;
            }
        }
    }

    /// Random non-affine pyramid (displaced vertices, non-planar base).
    pub fn random_pyramid(rng: &mut impl Rng, amount: f64) -> ElementMap {
        loop {
            let verts: Vec<Point3> = ElemKind::Pyramid
                .reference_vertices()
                .iter()
                .map(|v| {
                    *v + Vec3::new(
                        rng.gen_range(-amount..amount),
                        rng.gen_range(-amount..amount),
                        rng.gen_range(-amount..amount),
                    )
                })
                .collect();
            let map = ElementMap::new(ElemKind::Pyramid, verts).unwrap();
            if element_is_valid(&map) {
                return map;
            }
        }
    }

    /// Random regular pyramid: parallelogram base, arbitrary apex.
    pub fn random_regular_pyramid(rng: &mut impl Rng) -> ElementMap {
        loop {
            let v1 = Point3::new(
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
            );
            let u = Vec3::new(1.0, rng.gen_range(-0.15..0.15), rng.gen_range(-0.15..0.15));
            let w = Vec3::new(rng.gen_range(-0.15..0.15), 1.0, rng.gen_range(-0.15..0.15));
            let apex = v1
                + (u + w) * 0.5
                + Vec3::new(
                    rng.gen_range(-0.15..0.15),
                    rng.gen_range(-0.15..0.15),
                    1.0 + rng.gen_range(-0.15..0.15),
                );
            let verts = vec![v1, v1 + u, v1 + u + w, v1 + w, apex];
            let map = ElementMap::new(ElemKind::Pyramid, verts).unwrap();
            if element_is_valid(&map) {
                return map;
            }
        }
    }

    fn element_is_valid(map: &ElementMap) -> bool {
        let domain = match map.kind() {
            ElemKind::Tet => Domain::Tet,
            ElemKind::Hex => Domain::Hex,
            ElemKind::Pyramid => Domain::Pyramid,
        };
        let mut points = rule_for(domain, 3).unwrap().points;
        points.extend(map.kind().reference_vertices());
        points
            .iter()
            .all(|p| map.jacobian_unchecked(p).1 > 0.2)
    }

    /// Random scalar quadratic with analytic gradient.
    pub fn random_quadratic_scalar(rng: &mut impl Rng) -> FieldFn {
        let c: [f64; 10] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        FieldFn::Scalar(
            ScalarField::new(move |p: &Point3| {
                c[0] + c[1] * p.x
                    + c[2] * p.y
                    + c[3] * p.z
                    + c[4] * p.x * p.x
                    + c[5] * p.y * p.y
                    + c[6] * p.z * p.z
                    + c[7] * p.x * p.y
                    + c[8] * p.y * p.z
                    + c[9] * p.z * p.x
            })
            .with_gradient(move |p: &Point3| {
                Vec3::new(
                    c[1] + 2.0 * c[4] * p.x + c[7] * p.y + c[9] * p.z,
                    c[2] + 2.0 * c[5] * p.y + c[7] * p.x + c[8] * p.z,
                    c[3] + 2.0 * c[6] * p.z + c[8] * p.y + c[9] * p.x,
                )
            }),
        )
    }

    /// Random vector field with affine components and analytic curl.
    pub fn random_linear_vector(rng: &mut impl Rng) -> FieldFn {
        let a: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let m: [[f64; 3]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0)));
        FieldFn::Vector(
            VectorField::new(move |p: &Point3| {
                Vec3::new(
                    a[0] + m[0][0] * p.x + m[0][1] * p.y + m[0][2] * p.z,
                    a[1] + m[1][0] * p.x + m[1][1] * p.y + m[1][2] * p.z,
                    a[2] + m[2][0] * p.x + m[2][1] * p.y + m[2][2] * p.z,
                )
            })
            .with_curl(move |_| {
                Vec3::new(m[2][1] - m[1][2], m[0][2] - m[2][0], m[1][0] - m[0][1])
            }),
        )
    }

    /// Random lowest-order Raviart-Thomas-type field `a + beta x` with
    /// analytic divergence.
    pub fn random_rt_vector(rng: &mut impl Rng) -> FieldFn {
        let a = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let beta = rng.gen_range(-1.0..1.0);
        FieldFn::Vector(
            VectorField::new(move |p: &Point3| a + p.coords * beta)
                .with_divergence(move |_| 3.0 * beta),
        )
    }

    /// Fixed (deterministic) representatives used by cross-module tests.
    pub fn fixed_quadratic_scalar() -> FieldFn {
        FieldFn::Scalar(
            ScalarField::new(|p: &Point3| {
                0.4 + 0.9 * p.x - 0.3 * p.y + 0.7 * p.z + 0.5 * p.x * p.y - 0.2 * p.z * p.z
            })
            .with_gradient(|p: &Point3| {
                Vec3::new(0.9 + 0.5 * p.y, -0.3 + 0.5 * p.x, 0.7 - 0.4 * p.z)
            }),
        )
    }

    pub fn fixed_linear_vector() -> FieldFn {
        FieldFn::Vector(
            VectorField::new(|p: &Point3| {
                Vec3::new(0.3 + 0.4 * p.y - 0.2 * p.z, -0.5 + 0.6 * p.z, 0.8 + 0.1 * p.x)
            })
            .with_curl(|_| Vec3::new(-0.6, -0.2 - 0.1, 0.0 - 0.4)),
        )
    }

    pub fn fixed_rt_vector() -> FieldFn {
        FieldFn::Vector(
            VectorField::new(|p: &Point3| Vec3::new(0.2, 0.5, -0.3) + p.coords * 0.6)
                .with_divergence(|_| 1.8),
        )
    }

    /// Max sampled residual of the commuting square starting at `space`:
    /// interpolate-then-differentiate against differentiate-then-interpolate
    /// on one element.
    pub fn commuting_residual(
        space: SpaceKind,
        map: &ElementMap,
        field: &FieldFn,
        n_samples: usize,
        rng: &mut impl Rng,
    ) -> Result<f64> {
        let next = space.next().ok_or(Error::UnsupportedDerivative)?;
        let u: LocalInterpolant = interpolate(space, map, field)?;
        let dfield = field.derivative_field(space)?;
        let w = interpolate(next, map, &dfield)?;
        let mut residual = 0.0f64;
        for _ in 0..n_samples {
            let p = point_in(map.kind(), rng);
            let a = u.eval_derivative(&p)?;
            let b = w.eval(&p)?;
            residual = residual.max(a.sub(b).abs_max());
        }
        Ok(residual)
    }
}
