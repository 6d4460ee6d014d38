//! Lowest-order composite finite elements for the de Rham complex
//! (`H¹ → H(curl) → H(div) → L²`) on pyramids and on hybrid
//! tetrahedral-hexahedral-pyramidal (THP) meshes.
//!
//! The pyramid elements are macro elements: each shape function is a
//! piecewise polynomial over the two tetrahedra obtained by splitting the
//! pyramid along its `v1`-`v3` base diagonal. They carry the same interface
//! degrees of freedom as the standard lowest-order Lagrange /
//! Nédélec / Raviart-Thomas elements on tetrahedra and hexahedra, so the
//! three element kinds combine into conforming global spaces on THP meshes.
//!
//! Module map:
//! - [`refgeom`]: reference domains, barycentric coordinates, element maps
//!   and their Jacobians.
//! - [`refbasis`]: closed-form reference shape functions for all four spaces.
//! - [`quadrature`]: fixed-order rules on segments, triangles, quads, tets,
//!   hexes and composite rules on pyramids.
//! - [`dof`]: degree-of-freedom functionals (vertex values, edge tangential
//!   integrals, face fluxes, cell moments).
//! - [`femspace`]: pullbacks/pushforwards, nodal interpolation, local
//!   derivative matrices, exactness and commuting checks.
//! - [`mesh`]: THP mesh model, conformity validation, uniform refinement,
//!   distortion diagnostics.
//! - [`global`]: global DOF numbering with orientation signs, global
//!   interpolation, conformity and exactness checks.
//! - [`harness`]: demo mesh construction, manufactured fields, convergence
//!   studies and the element self-test suites behind the CLI.

pub mod dof;
pub mod femspace;
pub mod global;
pub mod harness;
pub mod mesh;
mod poly;
pub mod quadrature;
pub mod refbasis;
pub mod refgeom;

/// A point in reference or physical coordinates.
pub type Point3 = nalgebra::Point3<f64>;
/// A 3-vector (field values, normals, tangents).
pub type Vec3 = nalgebra::Vector3<f64>;
/// A 3x3 Jacobian-sized matrix.
pub type Mat3 = nalgebra::Matrix3<f64>;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("degenerate tetrahedron: signed 6*volume = {vol6:.3e}")]
    DegenerateTetrahedron { vol6: f64 },
    #[error("non-positive Jacobian {j:.6e} at reference point ({x:.4}, {y:.4}, {z:.4})")]
    NonPositiveJacobian { j: f64, x: f64, y: f64, z: f64 },
    #[error("element {index}: expected {expected} nodes for a {kind}, got {got}")]
    BadElementArity {
        index: usize,
        kind: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("derivative is not defined for L2 shape functions")]
    UnsupportedDerivative,
    #[error("field arity does not match the functional or space")]
    ArityMismatch,
    #[error("quadrature degree {degree} outside supported range 1..={max}")]
    DegreeOutOfRange { degree: usize, max: usize },
    #[error("mesh failed validation:\n{0}")]
    InvalidMesh(String),
    #[error("unknown manufactured field `{field}` for space {space}")]
    UnknownField { space: &'static str, field: String },
    #[error("unsupported mesh file version {0} (expected 1)")]
    UnsupportedVersion(u32),
    #[error("unknown element kind `{0}` in mesh file")]
    UnknownElementKind(String),
    #[error("invalid study configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("mesh file: {0}")]
    Format(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
