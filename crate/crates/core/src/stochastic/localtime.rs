use serde_json::json;

use super::path::check_start;
use super::walker::{run_path, StepRecord, Walker};
use super::{map_paths, Estimate, McParams, PathHorizon, PathSample, RngSpec, StochasticError};
use crate::geometry::{Domain, GeometryError, Point};
use crate::report::Report;

/// Minimum number of stored paths for [`local_time_consistency`].
pub const MIN_CONSISTENCY_PATHS: usize = 10_000;

/// Bias allowance constant: the check passes if `|mean D| ≤ 3·SE + C·√h`.
pub const CONSISTENCY_BIAS_CONSTANT: f64 = 0.1;

/// Per-path pieces of `L_T = V(B_0) − V(B_T) + ½∫ΔV(B_s) ds + martingale`.
#[derive(Clone, Copy, Debug, Default)]
struct RevuzTerms {
    local_time: f64,
    drop: f64,
    drift: f64,
}

impl RevuzTerms {
    fn defect(&self) -> f64 {
        self.local_time - self.drop - self.drift
    }
}

/// Left-point accumulation of `½ΔV h` along the path.
fn drift_increment(domain: &Domain, x: &Point, h: f64) -> Result<f64, GeometryError> {
    Ok(0.5 * domain.signed_distance_laplacian(x)? * h)
}

fn terms_from_path(domain: &Domain, p: &PathSample) -> Result<RevuzTerms, GeometryError> {
    let mut drift = 0.0;
    for x in &p.positions[..p.positions.len() - 1] {
        drift += drift_increment(domain, x, p.h)?;
    }
    Ok(RevuzTerms {
        local_time: p.final_localtime(),
        drop: domain.signed_distance(&p.positions[0]) - domain.signed_distance(&p.final_position()),
        drift,
    })
}

fn consistency_report(
    domain: &Domain,
    terms: &[RevuzTerms],
    rejected: usize,
    h: f64,
    horizon: f64,
    extra: serde_json::Value,
) -> Report {
    let defects: Vec<f64> = terms.iter().map(RevuzTerms::defect).collect();
    let d = Estimate::from_samples(&defects, false);
    let l = Estimate::from_samples(&terms.iter().map(|t| t.local_time).collect::<Vec<_>>(), false);
    let drop = Estimate::from_samples(&terms.iter().map(|t| t.drop).collect::<Vec<_>>(), false);
    let drift = Estimate::from_samples(&terms.iter().map(|t| t.drift).collect::<Vec<_>>(), false);
    let mut params = json!({ "domain": domain, "h": h, "path_horizon": horizon, "paths": terms.len() + rejected });
    if let (Some(p), Some(e)) = (params.as_object_mut(), extra.as_object()) {
        p.extend(e.clone());
    }
    let mut r = Report::new("local_time_consistency", params).clock(format!(
        "path clock (generator ½Δ), horizon T = {horizon}; semigroup time T/2 = {}",
        horizon / 2.0
    ));
    r.compare(d.mean.abs(), CONSISTENCY_BIAS_CONSTANT * h.sqrt(), d.se, 3.0 * d.se);
    r.diagnostic("mean_local_time", l);
    r.diagnostic("mean_v_drop", drop);
    r.diagnostic("mean_half_laplacian_integral", drift);
    r.diagnostic("mean_defect", d);
    r.diagnostic("rejected_paths", rejected);
    if rejected > 0 {
        r.warn(format!("{rejected} paths hit a singular point and were excluded"));
    }
    r
}

/// Revuz consistency of stored paths from a common start point: the push-sum
/// local time against `V(B_0) − V(B_T) + ½∫ΔV ds` on the same paths.
/// Paths through a singularity of `ΔV` are excluded and counted.
pub fn local_time_consistency(paths: &[PathSample], domain: &Domain) -> Result<Report, StochasticError> {
    if paths.len() < MIN_CONSISTENCY_PATHS {
        return Err(StochasticError::StatisticalPower(format!(
            "local-time consistency needs at least {MIN_CONSISTENCY_PATHS} paths, got {}",
            paths.len()
        )));
    }
    let x0 = paths[0].positions[0];
    if paths.iter().any(|p| p.positions[0] != x0) {
        return Err(StochasticError::InvalidParameter("paths must share their start point".into()));
    }
    let h = paths[0].h;
    let horizon = paths[0].horizon();
    let mut terms = Vec::with_capacity(paths.len());
    let mut rejected = 0;
    for p in paths {
        match terms_from_path(domain, p) {
            Ok(t) => terms.push(t),
            Err(_) => rejected += 1,
        }
    }
    if terms.is_empty() {
        return Err(StochasticError::AllRejected(paths.len()));
    }
    Ok(consistency_report(domain, &terms, rejected, h, horizon, json!({ "x0": x0 })))
}

/// Streaming form of [`local_time_consistency`]: simulates `mc.paths` paths
/// without storing them.
pub fn local_time_consistency_mc(
    domain: &Domain,
    x0: &Point,
    horizon: PathHorizon,
    mc: &McParams,
    rng: &RngSpec,
) -> Result<Report, StochasticError> {
    check_start(domain, x0)?;
    if mc.paths < MIN_CONSISTENCY_PATHS {
        return Err(StochasticError::StatisticalPower(format!(
            "local-time consistency needs at least {MIN_CONSISTENCY_PATHS} paths, got {}",
            mc.paths
        )));
    }
    let steps = horizon.steps(mc.h)?;
    let walker = Walker::new(domain, mc.h);
    let v0 = domain.signed_distance(x0);
    let results = map_paths(mc.paths, |i| -> Result<RevuzTerms, GeometryError> {
        let mut t = RevuzTerms::default();
        let mut r = rng.path_rng(i);
        let end = run_path(&walker, x0, steps, &mut r, 1.0, &mut |s: &StepRecord| {
            t.local_time += s.push;
            t.drift += drift_increment(domain, &s.from, mc.h)?;
            Ok(())
        })?;
        t.drop = v0 - domain.signed_distance(&end);
        Ok(t)
    });
    let total = results.len();
    let terms: Vec<RevuzTerms> = results.into_iter().filter_map(Result::ok).collect();
    if terms.is_empty() {
        return Err(StochasticError::AllRejected(total));
    }
    let rejected = total - terms.len();
    Ok(consistency_report(domain, &terms, rejected, mc.h, horizon.0, json!({ "x0": x0, "seed": rng.seed })))
}

/// Local time at horizon `T` on a fine grid (step `h`) and on the coarse grid
/// (step `2h`) driven by the pairwise sums of the same increments.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct CoupledLocalTime {
    pub h: f64,
    pub fine: Estimate,
    pub coarse: Estimate,
    /// `L^{2h} − L^{h}` per path; its standard error is far below those of the
    /// two marginals.
    pub difference: Estimate,
    pub rejected: usize,
}

pub fn coupled_local_time(
    domain: &Domain,
    x0: &Point,
    horizon: PathHorizon,
    h: f64,
    paths: usize,
    rng: &RngSpec,
) -> Result<CoupledLocalTime, StochasticError> {
    check_start(domain, x0)?;
    let coarse_steps = horizon.steps(2.0 * h)?;
    let fine = Walker::new(domain, h);
    let coarse = Walker::new(domain, 2.0 * h);
    let dim = x0.dim();
    let results = map_paths(paths, |i| -> Result<(f64, f64), GeometryError> {
        let mut r = rng.path_rng(i);
        let (mut xf, mut xc) = (*x0, *x0);
        let (mut lf, mut lc) = (0.0, 0.0);
        for k in 0..coarse_steps {
            let a = fine.increment(dim, &mut r, 1.0);
            let b = fine.increment(dim, &mut r, 1.0);
            let s1 = fine.step_with(2 * k, &xf, a)?;
            let s2 = fine.step_with(2 * k + 1, &s1.to, b)?;
            let sc = coarse.step_with(k, &xc, a + b)?;
            lf += s1.push + s2.push;
            lc += sc.push;
            xf = s2.to;
            xc = sc.to;
        }
        Ok((lf, lc))
    });
    let ok: Vec<(f64, f64)> = results.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
    if ok.is_empty() {
        return Err(StochasticError::AllRejected(paths));
    }
    let f: Vec<f64> = ok.iter().map(|p| p.0).collect();
    let c: Vec<f64> = ok.iter().map(|p| p.1).collect();
    let d: Vec<f64> = ok.iter().map(|p| p.1 - p.0).collect();
    Ok(CoupledLocalTime {
        h,
        fine: Estimate::from_samples(&f, false),
        coarse: Estimate::from_samples(&c, false),
        difference: Estimate::from_samples(&d, false),
        rejected: paths - ok.len(),
    })
}
