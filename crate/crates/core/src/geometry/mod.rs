//! Domains, signed distances, analytic scalar fields and boundary-curvature bounds.

mod domain;
mod field;
mod point;
mod profile;

pub use domain::{comparison_potential, cot_k, Domain, Reflection};
pub use field::ScalarField;
pub use point::{Point, Vector, MAX_DIM};
pub use profile::{Bump, Profile, MAX_CANTOR_LEVEL};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("unsupported dimension {0} (expected 1, 2 or 3)")]
    Dimension(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{what} is singular at {at:?}")]
    Singular { what: &'static str, at: Point },
    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),
}
