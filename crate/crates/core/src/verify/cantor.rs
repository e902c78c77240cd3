use web_time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{finish, CheckOptions, VerifyError, DISCRETIZATION_CONSTANT};
use crate::conformal::{timechange_curvature, CurvatureBoundSpec, GAUSS};
use crate::geometry::{Bump, Point, Profile, ScalarField, MAX_CANTOR_LEVEL};
use crate::report::Report;
use crate::stochastic::{map_paths, McParams, SemigroupTime};

/// Removed middle thirds of the first `level` Cantor generations as
/// `(generation, centre)`.
fn gaps(level: u32) -> Vec<(u32, f64)> {
    let mut out = Vec::new();
    let mut intervals = vec![(0.0, 1.0)];
    for n in 1..=level {
        let mut next = Vec::with_capacity(2 * intervals.len());
        for (a, len) in intervals {
            out.push((n, a + len / 2.0));
            next.push((a, len / 3.0));
            next.push((a + 2.0 * len / 3.0, len / 3.0));
        }
        intervals = next;
    }
    out
}

/// `∫_a^b g` by 16 panels of 8-point Gauss–Legendre.
fn panel_quadrature(a: f64, b: f64, g: impl Fn(f64) -> f64) -> f64 {
    const PANELS: usize = 16;
    let w = (b - a) / PANELS as f64;
    (0..PANELS)
        .map(|p| {
            let lo = a + p as f64 * w;
            GAUSS.iter().map(|&(s, gw)| gw * g(lo + s * w)).sum::<f64>() * w
        })
        .sum()
}

/// `∫|φ″|` of a bump.
pub fn bump_curvature_mass(bump: Bump) -> f64 {
    panel_quadrature(-0.5, 0.5, |x| bump.eval3(x).2.abs())
}

/// The weight `Φ_j(x₁)` with its three bounds checked on samples: `sup Φ_j ≤ ⅓`,
/// `sup|Φ_j′| ≤ sup|φ′|`, and `∫|Φ_j″| = C·(2^j − 1)` with `C = ∫|φ″|`.
pub fn cantor_weight(level: u32, bump: Bump) -> Result<(ScalarField, Report), VerifyError> {
    let started = Instant::now();
    if level > MAX_CANTOR_LEVEL {
        return Err(VerifyError::InvalidParameter(format!(
            "cantor level {level} exceeds the supported maximum {MAX_CANTOR_LEVEL}"
        )));
    }
    let profile = Profile::Cantor { level, bump };
    let field = ScalarField::Axis {
        axis: 0,
        profile: profile.clone(),
    };
    const SAMPLES: usize = 65;
    let (mut sup, mut sup_d, mut tv) = (0.0f64, 0.0f64, 0.0);
    for (n, c) in gaps(level) {
        let half = 0.5 * 3f64.powi(-(n as i32));
        for i in 0..SAMPLES {
            let x = c - half + 2.0 * half * i as f64 / (SAMPLES - 1) as f64;
            let (v, d, _) = profile.eval3(x);
            sup = sup.max(v);
            sup_d = sup_d.max(d.abs());
        }
        tv += panel_quadrature(c - half, c + half, |x| profile.eval3(x).2.abs());
    }
    let c = bump_curvature_mass(bump);
    let expected = c * ((1u64 << level) - 1) as f64;
    let mut report = Report::new("cantor_weight", json!({ "level": level, "bump": bump })).clock("no clock: static weight");
    report.compare(sup, bump.sup() / 3.0, 0.0, 1e-10);
    report.compare(sup_d, bump.sup_derivative(), 0.0, 1e-10);
    report.compare((tv - expected).abs(), 0.01 * expected, 0.0, 0.0);
    report.diagnostic("sup", sup);
    report.diagnostic("sup_derivative", sup_d);
    report.diagnostic("total_variation_derivative", tv);
    report.diagnostic("bump_mass", c);
    report.diagnostic("expected_total_variation", expected);
    Ok((field, finish(report, started)))
}

/// The conformal scenario `ψ = Φ_j(x₁)·η(x₂)` on the plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Cantor2Params {
    pub level: u32,
    pub bump: Bump,
    /// Semigroup time of `e^{tΔ_g}`, `Δ_g = e^{−2ψ}Δ`.
    pub t: f64,
    /// Central-difference step of the gradient estimate.
    pub epsilon: f64,
    pub probes: Vec<Point>,
    pub f: ScalarField,
}

impl Default for Cantor2Params {
    fn default() -> Self {
        Cantor2Params {
            level: 1,
            bump: Bump::CosSquared,
            t: 0.05,
            epsilon: 1e-3,
            probes: vec![
                Point::xy(0.5, 0.45),
                Point::xy(0.5, -0.45),
                Point::xy(1.0 / 6.0, 0.45),
                Point::xy(0.5, 0.0),
            ],
            f: ScalarField::Linear {
                slope: Point::xy(1.0, 0.5),
                offset: 0.0,
            },
        }
    }
}

impl Cantor2Params {
    pub fn new(level: u32) -> Self {
        Cantor2Params {
            level,
            ..Default::default()
        }
    }

    pub fn weight(&self) -> ScalarField {
        ScalarField::Axis {
            axis: 0,
            profile: Profile::Cantor {
                level: self.level,
                bump: self.bump,
            },
        }
        .times(ScalarField::Axis {
            axis: 1,
            profile: Profile::Eta,
        })
    }
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, (var / n).sqrt())
}

/// GE₁ for `g = e^{2ψ}·δ` with curvature `k_j = −e^{−2ψ}Δψ`: at each probe
/// `e^{−ψ}|∇P_t f| ≤ E[e^{−½∫k_j(X)} e^{−ψ(X)}|∇f|(X)]` where `dX = e^{−ψ(X)}dW`
/// runs to path time `2t`. The left side is a central difference of `P_t f`
/// over coupled paths driven by the same increments.
pub fn cantor2_scenario(params: &Cantor2Params, mc: &McParams, opts: &CheckOptions) -> Result<Report, VerifyError> {
    let started = Instant::now();
    if mc.paths < 2 {
        return Err(VerifyError::InvalidParameter(format!("need at least two paths, got {}", mc.paths)));
    }
    params.f.validate(2)?;
    if params.level > MAX_CANTOR_LEVEL {
        return Err(VerifyError::InvalidParameter(format!("cantor level {} too deep", params.level)));
    }
    if !(params.epsilon > 0.0) || params.probes.is_empty() {
        return Err(VerifyError::InvalidParameter("need a positive epsilon and at least one probe".into()));
    }
    let psi = params.weight();
    let spec = CurvatureBoundSpec::new(ScalarField::zero(), 2.0, None)?;
    let k = |x: &Point| timechange_curvature(&spec, &psi, x);

    let mut sup_k = 0.0f64;
    for (_, c) in gaps(params.level) {
        for i in 0..=40 {
            let x = Point::xy(c, -1.0 + i as f64 / 20.0);
            sup_k = sup_k.max(k(&x)?.abs());
        }
    }

    if !(params.t > 0.0 && params.t.is_finite()) {
        return Err(VerifyError::InvalidParameter(format!("t must be positive, got {}", params.t)));
    }
    let horizon = SemigroupTime(params.t).path_horizon();
    let steps = horizon.steps(mc.h)?;
    let h = mc.h;
    let sq = h.sqrt();
    let eps = params.epsilon;
    let grad_f = |x: &Point| params.f.gradient(x).map(|g| g.norm());

    let mut report = Report::new(
        "cantor2",
        json!({ "params": params, "mc": mc, "rng": opts.rng, "path_steps": steps }),
    )
    .clock(SemigroupTime(params.t).clock_note());
    let mut cap_hits = 0usize;
    for (pi, p) in params.probes.iter().enumerate() {
        let rng = opts.rng.substream(pi as u64);
        let starts = [
            *p,
            *p + Point::xy(eps, 0.0),
            *p - Point::xy(eps, 0.0),
            *p + Point::xy(0.0, eps),
            *p - Point::xy(0.0, eps),
        ];
        // one path: (∂₁ estimate, ∂₂ estimate, weight, capped)
        let one = |index: u64, sign: f64| -> Result<(f64, f64, f64, bool), VerifyError> {
            let mut r = rng.path_rng(index);
            let mut xs = starts;
            let mut k_prev = k(&xs[0])?;
            let mut int_k = 0.0;
            for _ in 0..steps {
                let dw = Point::xy(r.sample::<f64, _>(StandardNormal), r.sample::<f64, _>(StandardNormal)) * (sign * sq);
                for x in xs.iter_mut() {
                    *x = *x + dw * (-psi.value(x)).exp();
                }
                let k_now = k(&xs[0])?;
                int_k += 0.5 * (k_prev + k_now) * h;
                k_prev = k_now;
            }
            let d1 = (params.f.value(&xs[1]) - params.f.value(&xs[2])) / (2.0 * eps);
            let d2 = (params.f.value(&xs[3]) - params.f.value(&xs[4])) / (2.0 * eps);
            let mut exponent = -0.5 * int_k;
            let capped = exponent.abs() > mc.exponent_cap;
            if capped {
                exponent = exponent.clamp(-mc.exponent_cap, mc.exponent_cap);
            }
            let w = exponent.exp() * (-psi.value(&xs[0])).exp() * grad_f(&xs[0])?;
            Ok((d1, d2, w, capped))
        };
        let n = if mc.antithetic { mc.paths.div_ceil(2) } else { mc.paths };
        let samples: Vec<Result<(f64, f64, f64, bool), VerifyError>> = map_paths(n, |i| {
            if mc.antithetic {
                let (a, b) = (one(i, 1.0)?, one(i, -1.0)?);
                Ok(((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0, (a.2 + b.2) / 2.0, a.3 || b.3))
            } else {
                one(i, 1.0)
            }
        });
        let samples = samples.into_iter().collect::<Result<Vec<_>, _>>()?;
        cap_hits += samples.iter().filter(|s| s.3).count();
        let (g1, se1) = mean_se(&samples.iter().map(|s| s.0).collect::<Vec<_>>());
        let (g2, se2) = mean_se(&samples.iter().map(|s| s.1).collect::<Vec<_>>());
        let (rhs, se_r) = mean_se(&samples.iter().map(|s| s.2).collect::<Vec<_>>());
        let conf = (-psi.value(p)).exp();
        let norm = g1.hypot(g2);
        let lhs = conf * norm;
        let se_l = if norm > 0.0 {
            conf * ((g1 * se1).powi(2) + (g2 * se2).powi(2)).sqrt() / norm
        } else {
            conf * se1.hypot(se2)
        };
        let se = se_l.hypot(se_r);
        let delta = opts.tolerance_scale * DISCRETIZATION_CONSTANT * (mc.h.sqrt() + eps * eps) * lhs.max(rhs);
        report.compare(lhs, rhs, se, delta + 3.0 * se);
    }
    report.diagnostic("sup_abs_curvature", sup_k);
    report.diagnostic("cap_hits", cap_hits);
    if cap_hits > 0 {
        report.poison(format!("{cap_hits} paths hit the exponent cap"));
    }
    Ok(finish(report, started))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::Verdict;
    use std::f64::consts::PI;

    #[test]
    fn gap_enumeration() {
        let g = gaps(3);
        assert_eq!(g.len(), 7);
        assert_eq!(g[0], (1, 0.5));
        assert!((g[1].1 - 1.0 / 6.0).abs() < 1e-15 && (g[2].1 - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn bump_mass_oracle() {
        // ∫|2π² cos 2πx| over (−½, ½) = 4π
        assert!((bump_curvature_mass(Bump::CosSquared) - 4.0 * PI).abs() < 1e-6);
    }

    #[test]
    fn weight_bounds() {
        for j in [0, 1, 3, 6, 10] {
            for bump in [Bump::CosSquared, Bump::Polynomial] {
                let (_, r) = cantor_weight(j, bump).unwrap();
                assert_eq!(r.verdict, Verdict::Pass, "{j} {bump:?}: {:?}", r.diagnostics);
            }
        }
        let (_, r0) = cantor_weight(0, Bump::CosSquared).unwrap();
        assert_eq!(r0.diagnostics["sup"], 0.0);
        assert_eq!(r0.diagnostics["total_variation_derivative"], 0.0);
        assert!(cantor_weight(13, Bump::CosSquared).is_err());
    }

    #[test]
    fn flat_level_is_exact() {
        let r = cantor2_scenario(&Cantor2Params::new(0), &McParams::new(200, 1e-3), &CheckOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        for (l, rr) in r.lhs.iter().zip(&r.rhs) {
            assert!((l - rr).abs() < 1e-9);
        }
    }

    #[test]
    fn first_level_passes_and_curvature_grows() {
        let r = cantor2_scenario(&Cantor2Params::new(1), &McParams::new(2000, 1e-3), &CheckOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Pass, "{:?} {:?}", r.lhs, r.rhs);
        let sup = |j: u32| {
            let mut p = Cantor2Params::new(j);
            p.probes.truncate(1);
            cantor2_scenario(&p, &McParams::new(4, 1e-2), &CheckOptions::default()).unwrap().diagnostics["sup_abs_curvature"]
                .as_f64()
                .unwrap()
        };
        assert!(sup(6) > sup(3));
    }
}
