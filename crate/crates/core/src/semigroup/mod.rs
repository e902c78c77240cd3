//! Deterministic reference solvers: Neumann heat and Schrödinger semigroups on
//! structured grids, discrete gradients and Neumann spectral gaps.
//!
//! Time here is semigroup time (generator Δ).

mod grid;
mod solve;
mod spectral;

pub use grid::{Grid, GridFunction, GridSpec};
pub use solve::{gradient_norm, neumann_heat, schrodinger_heat, schrodinger_heat_with_boundary};
pub use spectral::{
    bessel_j, bessel_j_prime, bessel_j_prime_first_zero, disc_gap_oracle, spectral_gap, SpectralGap,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SemigroupError {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("grid function has {got} values, grid has {expected} nodes")]
    Length { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("eigen-solver failure: {0}")]
    Eigen(String),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
