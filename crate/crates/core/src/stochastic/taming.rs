use serde::{Deserialize, Serialize};

use super::path::check_start;
use super::walker::{path_stream, run_path, StepRecord, Walker};
use super::{map_paths, Estimate, McParams, PathHorizon, RngSpec, SemigroupTime, StochasticError};
use crate::geometry::{Domain, GeometryError, Point, ScalarField};

/// Feynman–Kac weight applied along reflected paths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TamingMode {
    /// `E_x[exp(−∫₀^{2t} φ(B_s) ds + N^ψ_{2t}) f(B_{2t})]`, the semigroup of the
    /// double potential at semigroup time `t`.
    DoublePotential {
        phi: ScalarField,
        psi: ScalarField,
        f: ScalarField,
    },
    /// `E_x[exp(−½∫k ds − ½∫ℓ dL) |∇f|(B_{2t})]`, the right side of the
    /// gradient estimate.
    Gradient {
        k: ScalarField,
        ell: ScalarField,
        f: ScalarField,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct TamingEstimate {
    pub estimates: Vec<Estimate>,
    pub rejected: usize,
    /// Paths whose exponent was clipped at `McParams::exponent_cap`.
    pub cap_hits: usize,
    pub path_horizon: f64,
    pub warnings: Vec<String>,
}

struct Weight {
    exponent: f64,
    end: Point,
}

fn double_potential_path(
    walker: &Walker<'_>,
    x0: &Point,
    steps: usize,
    rng: &RngSpec,
    i: u64,
    antithetic: bool,
    phi: &ScalarField,
    psi: &ScalarField,
) -> Result<Weight, GeometryError> {
    let h = walker.h();
    let (stream, sign) = path_stream(i, antithetic);
    let mut r = rng.path_rng(stream);
    let phi_const = phi.as_constant();
    let psi_const = psi.as_constant().is_some();
    let mut phi_int = 0.0;
    let mut phi_prev = phi_const.unwrap_or_else(|| phi.value(x0));
    let mut m = 0.0;
    let end = run_path(walker, x0, steps, &mut r, sign, &mut |s: &StepRecord| {
        if phi_const.is_none() {
            let next = phi.value(&s.to);
            phi_int += 0.5 * (phi_prev + next) * h;
            phi_prev = next;
        }
        if !psi_const {
            m += psi.gradient(&s.from)?.dot(&s.dw);
        }
        Ok(())
    })?;
    if let Some(c) = phi_const {
        phi_int = c * steps as f64 * h;
    }
    let n = if psi_const { 0.0 } else { psi.value(&end) - psi.value(x0) - m };
    Ok(Weight {
        exponent: -phi_int + n,
        end,
    })
}

fn gradient_path(
    walker: &Walker<'_>,
    x0: &Point,
    steps: usize,
    rng: &RngSpec,
    i: u64,
    antithetic: bool,
    k: &ScalarField,
    ell: &ScalarField,
) -> Result<Weight, GeometryError> {
    let h = walker.h();
    let (stream, sign) = path_stream(i, antithetic);
    let mut r = rng.path_rng(stream);
    let k_const = k.as_constant();
    let mut k_int = 0.0;
    let mut k_prev = k_const.unwrap_or_else(|| k.value(x0));
    let mut boundary = 0.0;
    let end = run_path(walker, x0, steps, &mut r, sign, &mut |s: &StepRecord| {
        if k_const.is_none() {
            let next = k.value(&s.to);
            k_int += 0.5 * (k_prev + next) * h;
            k_prev = next;
        }
        if s.push > 0.0 {
            boundary += ell.value(&s.to) * s.push;
        }
        Ok(())
    })?;
    if let Some(c) = k_const {
        k_int = c * steps as f64 * h;
    }
    Ok(Weight {
        exponent: -0.5 * k_int - 0.5 * boundary,
        end,
    })
}

/// Monte-Carlo taming expectation at each start point, at semigroup time `t`
/// (paths run to horizon `2t`). Start points use independent substreams.
pub fn taming_expectation(
    domain: &Domain,
    mode: &TamingMode,
    x0s: &[Point],
    t: SemigroupTime,
    mc: &McParams,
    rng: &RngSpec,
) -> Result<TamingEstimate, StochasticError> {
    if mc.paths < 2 {
        return Err(StochasticError::InvalidParameter("at least two paths are needed".into()));
    }
    let dim = domain.dim();
    let fields: Vec<&ScalarField> = match mode {
        TamingMode::DoublePotential { phi, psi, f } => vec![phi, psi, f],
        TamingMode::Gradient { k, ell, f } => vec![k, ell, f],
    };
    for f in fields {
        f.validate(dim)?;
    }
    let horizon: PathHorizon = t.path_horizon();
    let steps = horizon.steps(mc.h)?;
    let walker = Walker::new(domain, mc.h);
    let mut out = TamingEstimate {
        estimates: Vec::with_capacity(x0s.len()),
        rejected: 0,
        cap_hits: 0,
        path_horizon: horizon.0,
        warnings: Vec::new(),
    };
    for (j, x0) in x0s.iter().enumerate() {
        check_start(domain, x0)?;
        let sub = rng.substream(j as u64);
        let results = map_paths(mc.paths, |i| -> Result<(f64, bool), GeometryError> {
            let (w, payoff) = match mode {
                TamingMode::DoublePotential { phi, psi, f } => {
                    let w = double_potential_path(&walker, x0, steps, &sub, i, mc.antithetic, phi, psi)?;
                    let v = f.value(&w.end);
                    (w, v)
                }
                TamingMode::Gradient { k, ell, f } => {
                    let w = gradient_path(&walker, x0, steps, &sub, i, mc.antithetic, k, ell)?;
                    let v = f.gradient(&w.end)?.norm();
                    (w, v)
                }
            };
            let capped = w.exponent > mc.exponent_cap;
            Ok((w.exponent.min(mc.exponent_cap).exp() * payoff, capped))
        });
        let mut samples = Vec::with_capacity(results.len());
        for r in results {
            match r {
                Ok((v, capped)) => {
                    samples.push(v);
                    out.cap_hits += capped as usize;
                }
                Err(_) => out.rejected += 1,
            }
        }
        if samples.is_empty() {
            return Err(StochasticError::AllRejected(mc.paths));
        }
        // an odd rejection would misalign antithetic pairs
        let antithetic = mc.antithetic && samples.len() == mc.paths;
        let e = Estimate::from_samples(&samples, antithetic);
        if let Some(target) = mc.target_se {
            if e.se > target {
                out.warnings.push(format!(
                    "start point {j}: standard error {:.3e} exceeds the requested {target:.3e}",
                    e.se
                ));
            }
        }
        out.estimates.push(e);
    }
    if out.rejected > 0 {
        out.warnings.push(format!("{} paths hit a singular point and were excluded", out.rejected));
    }
    if out.cap_hits > 0 {
        out.warnings
            .push(format!("{} path exponents were capped at {}", out.cap_hits, mc.exponent_cap));
    }
    Ok(out)
}
