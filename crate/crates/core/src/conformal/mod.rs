//! Conformal time change `d′ = e^ψ ⊙ d`: lengths, geodesics, transformed
//! curvature bounds, convexification weights and EVI gradient flows.

mod convexity;
mod curvature;
mod evi;
mod geodesic;
mod lbfgs;
mod polyline;

pub use convexity::{check_local_convexity, convexification_weight, ConvexityParams, PairSampler};
pub use curvature::{timechange_curvature, timechange_curvature_phi, CurvatureBoundSpec};
pub use evi::{evi_contraction, evi_flow, EviParams, Trajectory};
pub(crate) use evi::GAUSS;
pub use geodesic::{conformal_distance, conformal_length, geodesic, geodesic_with_info, Geodesic, GeodesicParams};
pub use polyline::Polyline;

use thiserror::Error;

use crate::geometry::GeometryError;

#[derive(Debug, Error)]
pub enum ConformalError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("geodesic descent did not converge in {iterations} iterations (residual {residual:.3e})")]
    Convergence {
        iterations: usize,
        residual: f64,
        last: Box<Polyline>,
    },
    #[error("gradient flow diverged at t = {t}: |∇V| = {gradient}")]
    Divergence { t: f64, gradient: f64 },
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
