use web_time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::gradient::check_ge1;
use super::probe::ProbeGrid;
use super::{finish, CheckOptions, VerifyError, DISCRETIZATION_CONSTANT};
use crate::geometry::{cot_k, Domain, Point, Profile, ScalarField};
use crate::report::Report;
use crate::semigroup::{disc_gap_oracle, spectral_gap, Grid, GridSpec};
use crate::stochastic::{taming_expectation, McParams, PathHorizon, TamingMode};

fn unit_slope(dim: usize) -> ScalarField {
    ScalarField::Linear {
        slope: Point::unit(dim, 0),
        offset: 0.0,
    }
}

/// `E_x[e^{−c·L_τ}]` for each start point, `c = −½·ell` of the gradient mode with
/// a unit-gradient payoff.
fn boundary_moment(
    domain: &Domain,
    rate: f64,
    points: &[Point],
    horizon: PathHorizon,
    mc: &McParams,
    opts: &CheckOptions,
) -> Result<crate::stochastic::TamingEstimate, VerifyError> {
    let mode = TamingMode::Gradient {
        k: ScalarField::zero(),
        ell: ScalarField::constant(2.0 * rate),
        f: unit_slope(domain.dim()),
    };
    let est = taming_expectation(domain, &mode, points, horizon.semigroup_time(), mc, &opts.rng)?;
    if est.path_horizon != horizon.0 {
        return Err(VerifyError::Clock(format!("requested horizon {} but paths ran to {}", horizon.0, est.path_horizon)));
    }
    Ok(est)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallDecayParams {
    pub radius: f64,
    pub dim: usize,
    /// Path time of the local time `L_t`.
    pub t: f64,
    /// Multiplies `cot r` in the path weight (not in the bound); `0` is the control.
    #[serde(default = "one")]
    pub cot_scale: f64,
}

fn one() -> f64 {
    1.0
}

impl BallDecayParams {
    pub fn new(radius: f64, dim: usize, t: f64) -> Self {
        BallDecayParams {
            radius,
            dim,
            t,
            cot_scale: 1.0,
        }
    }
}

/// Boundary-curvature decay in a ball of radius `r < π/4`:
/// `E_x[e^{−cot r·L_t}] ≤ e^{1 − t(N−1)cot²r/2}`, and the gradient ratio
/// `|∇P_{t/2}f|²/P_{t/2}|∇f|²` below the same moment for `f = x₁`.
pub fn check_ball_decay(params: &BallDecayParams, mc: &McParams, opts: &CheckOptions) -> Result<Report, VerifyError> {
    let started = Instant::now();
    let BallDecayParams { radius: r, dim, t, cot_scale } = *params;
    if !(r > 0.0 && r < std::f64::consts::FRAC_PI_4) {
        return Err(VerifyError::InvalidParameter(format!("radius must lie in (0, π/4), got {r}")));
    }
    if !(t > 0.0) {
        return Err(VerifyError::InvalidParameter(format!("t must be positive, got {t}")));
    }
    let domain = Domain::ball(Point::origin(dim), r)?;
    let cot = cot_k(1.0, r)?;
    let n = dim as f64;
    let bound = (1.0 - t * 0.5 * (n - 1.0) * cot * cot).exp();
    let probes = [(0.1 * r, 0.0), (0.5 * r, 0.0), (r, 0.0)];
    let x1 = unit_slope(dim);
    let pg = ProbeGrid::new(&domain, &x1, &probes, opts.cells_or(400), 0.0)?;
    let points: Vec<Point> = probes.iter().map(|p| pg.point(*p)).collect();
    let horizon = PathHorizon(t);
    let est = boundary_moment(&domain, cot_scale * cot, &points, horizon, mc, opts)?;
    let grad = pg.heat_gradient(&x1, horizon.semigroup_time().0, &probes)?;
    let hg = pg.grid.spacing();
    let rate = opts.tolerance_scale * DISCRETIZATION_CONSTANT * (mc.h.sqrt() + hg * hg);

    let mut report = Report::new(
        "ball_decay",
        json!({ "params": params, "mc": mc, "probes": probes, "bound": bound, "cot_r": cot, "seed": opts.rng }),
    )
    .clock(format!(
        "path time t = {t} for L_t (generator ½Δ); gradient ratio at semigroup time t/2 = {}",
        0.5 * t
    ));
    // first the moment bound at each probe, then the gradient ratio below the moment
    for e in &est.estimates {
        report.compare(e.mean, bound, e.se, rate * bound + 3.0 * e.se);
    }
    for (g, e) in grad.iter().zip(&est.estimates) {
        let ratio = g * g;
        report.compare(ratio, e.mean, e.se, rate * ratio.max(e.mean) + 3.0 * e.se);
    }
    if bound >= 1.0 {
        report.warn(format!(
            "trivial bound {bound:.4} ≥ 1: t must exceed {:.4} for decay",
            2.0 / ((n - 1.0) * cot * cot)
        ));
    }
    report.diagnostic("bound", bound);
    report.diagnostic("moments", est.estimates.iter().map(|e| e.mean).collect::<Vec<_>>());
    report.diagnostic("cap_hits", est.cap_hits);
    for w in est.warnings {
        report.warn(w);
    }
    if est.cap_hits > 0 {
        report.poison("exponent cap reached on some paths");
    }
    Ok(finish(report, started))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CballParams {
    pub radius: f64,
    /// Semigroup time of the gradient estimate.
    pub t: f64,
    pub k: ScalarField,
    pub ell: ScalarField,
    pub f: ScalarField,
    /// Path times of the growth fit; empty skips the fit.
    pub fit_times: Vec<f64>,
}

impl CballParams {
    /// `k ≡ −1`, `ℓ ≡ −1/r`, `f` a radial Gaussian of width `2r`, fit over path
    /// times `{¼, ½, 1, 2, 4}`.
    pub fn new(radius: f64, t: f64) -> Self {
        CballParams {
            radius,
            t,
            k: ScalarField::constant(-1.0),
            ell: ScalarField::constant(-1.0 / radius),
            f: ScalarField::Radial {
                center: Point::origin(3),
                profile: Profile::Gaussian {
                    amplitude: 1.0,
                    width: 2.0 * radius,
                },
            },
            fit_times: vec![0.25, 0.5, 1.0, 2.0, 4.0],
        }
    }

    /// The boundary-blind control: `k ≡ ℓ ≡ 0` with the Neumann-harmonic dipole,
    /// whose gradient peaks on the boundary.
    pub fn boundary_blind(radius: f64, t: f64) -> Self {
        CballParams {
            k: ScalarField::zero(),
            ell: ScalarField::zero(),
            f: ScalarField::Dipole {
                center: Point::origin(3),
                radius,
            },
            fit_times: Vec::new(),
            ..CballParams::new(radius, t)
        }
    }
}

/// Least-squares fit of `y ≈ a + bτ + c√τ`; returns `([a, b, c], rms residual)`.
fn growth_fit(tau: &[f64], y: &[f64]) -> Option<([f64; 3], f64)> {
    if tau.len() < 3 {
        return None;
    }
    let rows: Vec<[f64; 3]> = tau.iter().map(|t| [1.0, *t, t.sqrt()]).collect();
    let mut m = [[0.0; 3]; 3];
    let mut v = [0.0; 3];
    for (r, yi) in rows.iter().zip(y) {
        for i in 0..3 {
            v[i] += r[i] * yi;
            for j in 0..3 {
                m[i][j] += r[i] * r[j];
            }
        }
    }
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&m);
    if d.abs() < 1e-14 {
        return None;
    }
    let mut coef = [0.0; 3];
    for (c, out) in coef.iter_mut().enumerate() {
        let mut mc = m;
        for i in 0..3 {
            mc[i][c] = v[i];
        }
        *out = det(&mc) / d;
    }
    let ss: f64 = rows
        .iter()
        .zip(y)
        .map(|(r, yi)| (coef[0] * r[0] + coef[1] * r[1] + coef[2] * r[2] - yi).powi(2))
        .sum();
    Some((coef, (ss / tau.len() as f64).sqrt()))
}

/// Outside the ball `B_r ⊂ ℝ³`: (a) the gradient estimate with the given `k`, `ℓ`
/// (a verdict); (b) a fit of `log E[e^{L_τ/r}]` against `a + bτ + c√τ` from a
/// boundary start (diagnostic only).
pub fn check_cball(params: &CballParams, mc: &McParams, opts: &CheckOptions) -> Result<Report, VerifyError> {
    let started = Instant::now();
    let r = params.radius;
    let domain = Domain::ball_complement(Point::origin(3), r)?;
    let t = crate::stochastic::SemigroupTime(params.t);
    let mut report = check_ge1(&domain, &params.k, &params.ell, &params.f, t, mc, &opts.named("gradient"))?;
    report.check = "cball".into();
    report.params = json!({ "params": params, "mc": mc, "gradient_check": report.params, "seed": opts.rng });
    if !params.fit_times.is_empty() {
        let x0 = [Point::xyz(r, 0.0, 0.0)];
        let mut logs = Vec::with_capacity(params.fit_times.len());
        let mut caps = 0;
        for (i, tau) in params.fit_times.iter().enumerate() {
            let sub = opts.named(&format!("fit{i}"));
            let est = boundary_moment(&domain, -1.0 / r, &x0, PathHorizon(*tau), mc, &sub)?;
            caps += est.cap_hits;
            logs.push(est.estimates[0].mean.ln());
        }
        report.diagnostic("fit_times", &params.fit_times);
        report.diagnostic("log_moments", &logs);
        match growth_fit(&params.fit_times, &logs) {
            Some((coef, rms)) => {
                report.diagnostic("fit", json!({ "a": coef[0], "b": coef[1], "c": coef[2], "rms_residual": rms }));
            }
            None => report.warn("growth fit needs at least three distinct times"),
        }
        if caps > 0 {
            report.poison(format!("{caps} exponents capped in the growth fit"));
        }
    }
    Ok(finish(report, started))
}

/// `λ₁(disc of radius r) ≥ (N−1)/2·cot²r`, with the discrete `λ₁` also held
/// within 0.5% of the Bessel value `(j′₁₁/r)²`.
pub fn check_spectral_gap(r: f64, n: usize, opts: &CheckOptions) -> Result<Report, VerifyError> {
    let started = Instant::now();
    if n != 2 {
        return Err(VerifyError::Unsupported(format!("the spectral gap check runs on discs (n = 2), got n = {n}")));
    }
    if !(r > 0.0 && r < std::f64::consts::FRAC_PI_4) {
        return Err(VerifyError::InvalidParameter(format!("radius must lie in (0, π/4), got {r}")));
    }
    let radial = opts.cells_or(64);
    let spec = GridSpec::Disc {
        radius: r,
        radial,
        angular: 2 * radial,
    };
    let gap = spectral_gap(&Grid::new(spec.clone())?)?;
    let cot = cot_k(1.0, r)?;
    let bound = 0.5 * (n as f64 - 1.0) * cot * cot;
    let oracle = disc_gap_oracle(r);
    let rel = (gap.lambda1 / oracle - 1.0).abs();
    let mut report = Report::new("spectral_gap", json!({ "radius": r, "n": n, "grid": spec }))
        .clock("eigenvalue of −Δ (semigroup clock)");
    report.compare(bound, gap.lambda1, 0.0, 0.0);
    report.compare(rel, 5e-3, 0.0, 0.0);
    report.diagnostic("lambda1", gap.lambda1);
    report.diagnostic("bound", bound);
    report.diagnostic("bessel_oracle", oracle);
    report.diagnostic("relative_error", rel);
    Ok(finish(report, started))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::Verdict;

    #[test]
    fn bound_arithmetic() {
        let cot = 1.0 / 0.5f64.tan();
        let bound = (1.0 - 2.0 * 0.5 * cot * cot).exp();
        assert!((cot * cot - 3.3507).abs() < 1e-4);
        assert!((bound - 0.0953).abs() < 1e-4);
    }

    #[test]
    fn ball_decay_and_control() {
        let mc = McParams::new(2000, 2e-3);
        let opts = CheckOptions::seeded(11);
        let r = check_ball_decay(&BallDecayParams::new(0.5, 2, 2.0), &mc, &opts).unwrap();
        assert_eq!(r.verdict, Verdict::Pass, "{:?}", r.lhs);
        assert!((r.diagnostics["bound"].as_f64().unwrap() - 0.0953).abs() < 1e-4);
        let ctl = BallDecayParams {
            cot_scale: 0.0,
            ..BallDecayParams::new(0.5, 2, 2.0)
        };
        let c = check_ball_decay(&ctl, &mc, &opts).unwrap();
        assert_eq!(c.verdict, Verdict::Fail);
        // with no boundary weight the moment is exactly one
        assert!(c.lhs[..3].iter().all(|v| *v == 1.0));
    }

    #[test]
    fn short_times_warn_about_a_trivial_bound() {
        let r = check_ball_decay(&BallDecayParams::new(0.5, 2, 0.2), &McParams::new(200, 1e-2), &CheckOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(r.warnings.iter().any(|w| w.contains("trivial")));
    }

    #[test]
    fn spectral_gap_examples() {
        // ½cot²(0.3) = 5.2253 and ½cot²(0.7) = 0.70477, computed by hand
        for (r, lambda, bound) in [(0.3, 37.66, 5.2253), (0.5, 13.56, 1.675), (0.7, 6.917, 0.70477)] {
            let rep = check_spectral_gap(r, 2, &CheckOptions::default()).unwrap();
            assert_eq!(rep.verdict, Verdict::Pass);
            let l = rep.diagnostics["lambda1"].as_f64().unwrap();
            let b = rep.diagnostics["bound"].as_f64().unwrap();
            assert!((l / lambda - 1.0).abs() < 5e-3, "{l} vs {lambda}");
            assert!((b / bound - 1.0).abs() < 2e-3, "{b} vs {bound}");
        }
        assert!(check_spectral_gap(0.5, 3, &CheckOptions::default()).is_err());
    }

    #[test]
    fn fit_recovers_exact_coefficients() {
        let tau = [0.25f64, 0.5, 1.0, 2.0, 4.0];
        let y: Vec<f64> = tau.iter().map(|t| 0.3 + 1.5 * t - 0.7 * t.sqrt()).collect();
        let (c, rms) = growth_fit(&tau, &y).unwrap();
        assert!((c[0] - 0.3).abs() < 1e-9 && (c[1] - 1.5).abs() < 1e-9 && (c[2] + 0.7).abs() < 1e-9);
        assert!(rms < 1e-9);
    }

    #[test]
    fn cball_gradient_estimate_and_control() {
        let mc = McParams::new(2000, 2e-3);
        let opts = CheckOptions::seeded(2);
        let mut p = CballParams::new(1.0, 0.5);
        p.fit_times = vec![0.25, 0.5, 1.0];
        let r = check_cball(&p, &mc, &opts).unwrap();
        assert_eq!(r.verdict, Verdict::Pass, "{:?} {:?}", r.slack, r.warnings);
        assert!(r.diagnostics.contains_key("fit"));
        let c = check_cball(&CballParams::boundary_blind(1.0, 0.5), &mc, &opts).unwrap();
        assert_eq!(c.verdict, Verdict::Fail, "{:?}", c.slack);
    }
}
