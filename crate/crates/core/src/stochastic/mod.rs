//! Reflected Brownian motion in path clock (generator ½Δ), boundary local time,
//! additive functionals and Feynman–Kac weights.
//!
//! Semigroup time `s` (generator Δ) corresponds to path horizon `2s`. The two
//! clocks have distinct types so that the conversion happens in one place.

mod localtime;
mod path;
mod rng;
mod taming;
mod walker;

pub use localtime::{
    coupled_local_time, local_time_consistency, local_time_consistency_mc, CoupledLocalTime,
};
pub use path::{
    additive_functional_n, decomposition_identity, fk_exponent, simulate_many, simulate_reflected,
    time_change_path, PathSample,
};
pub use rng::{stream_tag, RngSpec};
pub use taming::{taming_expectation, TamingEstimate, TamingMode};
pub use walker::{map_paths, run_path, PathObserver, StepRecord, Walker};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::GeometryError;

#[derive(Debug, Error)]
pub enum StochasticError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("insufficient statistical power: {0}")]
    StatisticalPower(String),
    #[error("path has no stochastic integral attached; simulate with a ψ")]
    MissingFunctional,
    #[error("clock error: {0}")]
    Clock(String),
    #[error("all {0} paths were rejected")]
    AllRejected(usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Time in the semigroup clock (generator Δ).
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct SemigroupTime(pub f64);

/// Horizon in the path clock (generator ½Δ).
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct PathHorizon(pub f64);

impl SemigroupTime {
    /// `P_s f(x) = E_x[f(B_{2s})]`.
    pub fn path_horizon(self) -> PathHorizon {
        PathHorizon(2.0 * self.0)
    }

    pub fn clock_note(self) -> String {
        format!(
            "semigroup time t = {} (generator Δ); paths run to horizon 2t = {} (generator ½Δ)",
            self.0,
            2.0 * self.0
        )
    }
}

impl PathHorizon {
    pub fn semigroup_time(self) -> SemigroupTime {
        SemigroupTime(0.5 * self.0)
    }

    /// Number of Euler steps of size `h`; the horizon must be a multiple of `h`.
    pub fn steps(self, h: f64) -> Result<usize, StochasticError> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(StochasticError::InvalidParameter(format!("step must be positive, got {h}")));
        }
        if !(self.0 >= 0.0 && self.0.is_finite()) {
            return Err(StochasticError::InvalidParameter(format!("horizon must be ≥ 0, got {}", self.0)));
        }
        let n = (self.0 / h).round();
        if (n * h - self.0).abs() > 1e-9 * self.0.max(h) {
            return Err(StochasticError::InvalidParameter(format!(
                "horizon {} is not an integer multiple of the step {h}",
                self.0
            )));
        }
        Ok(n as usize)
    }
}

/// Monte-Carlo parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McParams {
    pub paths: usize,
    /// Euler step in path clock.
    pub h: f64,
    #[serde(default)]
    pub antithetic: bool,
    /// Per-path cap on exponents of Feynman–Kac weights.
    #[serde(default = "default_cap")]
    pub exponent_cap: f64,
    /// Requested standard error; wider estimates carry a statistical-power warning.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_se: Option<f64>,
}

fn default_cap() -> f64 {
    60.0
}

impl Default for McParams {
    fn default() -> Self {
        McParams {
            paths: 10_000,
            h: 1e-3,
            antithetic: false,
            exponent_cap: default_cap(),
            target_se: None,
        }
    }
}

impl McParams {
    pub fn new(paths: usize, h: f64) -> Self {
        McParams {
            paths,
            h,
            ..Default::default()
        }
    }
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    /// Mean and standard error by fixed-order pairwise summation. With
    /// `antithetic`, consecutive samples are averaged first.
    pub fn from_samples(samples: &[f64], antithetic: bool) -> Estimate {
        if antithetic && samples.len() >= 2 {
            let pairs: Vec<f64> = samples.chunks_exact(2).map(|p| 0.5 * (p[0] + p[1])).collect();
            return Estimate::from_samples(&pairs, false);
        }
        let n = samples.len();
        if n == 0 {
            return Estimate {
                mean: f64::NAN,
                se: f64::NAN,
                n,
            };
        }
        let mean = pairwise_sum(samples) / n as f64;
        let dev: Vec<f64> = samples.iter().map(|x| (x - mean).powi(2)).collect();
        let var = if n > 1 { pairwise_sum(&dev) / (n - 1) as f64 } else { 0.0 };
        Estimate {
            mean,
            se: (var / n as f64).sqrt(),
            n,
        }
    }
}

/// Pairwise summation in a fixed order (independent of thread scheduling).
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        xs.iter().sum()
    } else {
        let (a, b) = xs.split_at(xs.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}
