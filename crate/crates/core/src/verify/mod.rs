//! The inequality harness: each quantitative claim becomes a named check that
//! returns a [`Report`].
//!
//! Monte-Carlo comparisons use `compare(lhs, rhs, se, δ + 3·se)`: PASS when the
//! violation is within the discretization allowance `δ` plus three standard
//! errors, FAIL when it exceeds `δ + 6·se`, INCONCLUSIVE in between.

mod ball;
mod cantor;
mod gradient;
mod ibp;
mod probe;
mod suite;

pub use ball::{check_ball_decay, check_cball, check_spectral_gap, BallDecayParams, CballParams};
pub use cantor::{bump_curvature_mass, cantor2_scenario, cantor_weight, Cantor2Params};
pub use gradient::{check_be1_weakform, check_ge1, check_ge2, ge1_probes};
pub use ibp::{check_integration_by_parts, IBP_ALLOWANCE};
pub use probe::angular_mode;
pub use suite::{overall, run_suite, suite_ids, summary_csv, EntryKind, SuiteConfig, SuiteEntry, SuiteResult, SUITE};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conformal::ConformalError;
use crate::geometry::GeometryError;
use crate::report::{Report, Verdict};
use crate::semigroup::SemigroupError;
use crate::stochastic::{RngSpec, StochasticError};

/// `C` in the allowance `δ = C·(√h + h_grid²)·scale` of Monte-Carlo-vs-PDE checks.
pub const DISCRETIZATION_CONSTANT: f64 = 1.0;
/// `C` in the allowance `δ = C·h_grid²·scale` of purely deterministic grid checks.
pub const GRID_CONSTANT: f64 = 10.0;
/// Nodewise floor on the GE₂ slack, on top of the grid allowance.
pub const GE2_FLOOR: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("clock mismatch: {0}")]
    Clock(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Stochastic(#[from] StochasticError),
    #[error(transparent)]
    Semigroup(#[from] SemigroupError),
    #[error(transparent)]
    Conformal(#[from] ConformalError),
}

/// Settings shared by all checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckOptions {
    pub rng: RngSpec,
    /// Grid cells across the domain's length scale; each check has its own default.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cells: Option<usize>,
    /// Multiplies every deterministic allowance.
    pub tolerance_scale: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            rng: RngSpec::new(0),
            cells: None,
            tolerance_scale: 1.0,
        }
    }
}

impl CheckOptions {
    pub fn seeded(seed: u64) -> Self {
        CheckOptions {
            rng: RngSpec::new(seed),
            ..Default::default()
        }
    }

    /// Same settings on an independent random stream.
    pub fn named(&self, name: &str) -> Self {
        CheckOptions {
            rng: self.rng.named(name),
            ..self.clone()
        }
    }

    pub(crate) fn cells_or(&self, default: usize) -> usize {
        self.cells.unwrap_or(default)
    }
}

/// Stamps the runtime and attaches the rerun advice to inconclusive reports.
pub(crate) fn finish(mut report: Report, started: web_time::Instant) -> Report {
    if report.verdict == Verdict::Inconclusive {
        report.warn("inconclusive: rerun with 4× paths");
    }
    report.finish(started)
}
