//! The named check table behind `verify <id|all>`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{
    cantor2_scenario, cantor_weight, check_ball_decay, check_be1_weakform, check_cball, check_ge1, check_ge2,
    check_integration_by_parts, check_spectral_gap, BallDecayParams, Cantor2Params, CballParams, CheckOptions, VerifyError,
};
use crate::conformal::{check_local_convexity, convexification_weight, evi_contraction, ConvexityParams, EviParams, PairSampler};
use crate::geometry::{Bump, Domain, Point, Profile, ScalarField};
use crate::report::{Report, Verdict};
use crate::semigroup::GridSpec;
use crate::stochastic::{local_time_consistency_mc, map_paths, McParams, PathHorizon, RngSpec, SemigroupTime};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryKind {
    /// A claim that should hold: expected PASS.
    Check,
    /// A deliberately wrong variant: expected FAIL.
    Control,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SuiteEntry {
    pub id: &'static str,
    pub kind: EntryKind,
    pub summary: &'static str,
}

impl SuiteEntry {
    pub fn expected(&self) -> Verdict {
        match self.kind {
            EntryKind::Check => Verdict::Pass,
            EntryKind::Control => Verdict::Fail,
        }
    }
}

const fn entry(id: &'static str, kind: EntryKind, summary: &'static str) -> SuiteEntry {
    SuiteEntry { id, kind, summary }
}

use EntryKind::{Check, Control};

pub const SUITE: &[SuiteEntry] = &[
    entry("local-time-halfspace", Check, "Skorokhod push sum vs Itô–Tanaka identity in a half-plane"),
    entry("local-time-ball", Check, "push sum vs Itô–Tanaka in the unit disc"),
    entry("local-time-complement", Check, "push sum vs Itô–Tanaka outside the unit ball in 3D"),
    entry("ge1-interval", Check, "GE₁ on [0, π] with f = cos x"),
    entry("ge1-ball", Check, "GE₁ in B(0, ½) with ℓ = 1/r, f = x₁, t = 0.1"),
    entry("ge1-ball-control", Control, "GE₁ in B(0, ½) with ℓ = 20"),
    entry("ge2-interval", Check, "GE₂(0, 1) on [0, π], f = cos x"),
    entry("ge2-box", Check, "GE₂(0, 2) on [0, π]²"),
    entry("ge2-dimension-control", Control, "GE₂(0, ½) on [0, π]"),
    entry("be1-flat", Check, "weak BE₁(0, ∞) on [0, π]"),
    entry("be1-negative", Check, "weak BE₁(−1, ∞) on [0, π]"),
    entry("be1-control", Control, "weak BE₁(1, ∞) on [0, π]"),
    entry("ball-decay", Check, "E[e^{−cot r·L_t}] decay in a disc of radius ½"),
    entry("ball-decay-control", Control, "the same without the boundary weight"),
    entry("cball", Check, "GE₁ outside B(0, 1) in 3D with k = −1, ℓ = −1/r"),
    entry("cball-control", Control, "GE₁ outside B(0, 1) with k = ℓ = 0 on the dipole"),
    entry("spectral-gap-r0.3", Check, "λ₁ of the disc of radius 0.3 vs the bound"),
    entry("spectral-gap-r0.5", Check, "λ₁ of the disc of radius 0.5 vs the bound"),
    entry("spectral-gap-r0.7", Check, "λ₁ of the disc of radius 0.7 vs the bound"),
    entry("ibp-disc", Check, "integration by parts on the unit disc"),
    entry("ibp-interval", Check, "integration by parts on [0, 2]"),
    entry("convexity", Check, "geodesic convexity outside B(0, 1) under the weight"),
    entry("convexity-control", Control, "the same with ψ = 0"),
    entry("evi-quadratic", Check, "EVI contraction of a quadratic flow"),
    entry("evi-quartic", Check, "EVI contraction of |x|⁴/4 with ℓ = |x|²"),
    entry("cantor-weight", Check, "bounds on Φ₁₀"),
    entry("cantor2", Check, "GE₁ under ψ = Φ₁(x₁)η(x₂)"),
];

pub fn suite_ids() -> Vec<&'static str> {
    SUITE.iter().map(|e| e.id).collect()
}

/// Overrides applied to every entry of a suite run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    /// Path-clock Euler step.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cells: Option<usize>,
    pub tolerance_scale: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: 0,
            paths: None,
            dt: None,
            cells: None,
            tolerance_scale: 1.0,
        }
    }
}

impl SuiteConfig {
    fn mc(&self, paths: usize, h: f64) -> McParams {
        let mut mc = McParams::new(self.paths.unwrap_or(paths), self.dt.unwrap_or(h));
        mc.antithetic = true;
        mc
    }

    fn opts(&self, id: &str) -> CheckOptions {
        CheckOptions {
            rng: RngSpec::new(self.seed).named(id),
            cells: self.cells,
            tolerance_scale: self.tolerance_scale,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteResult {
    pub id: String,
    pub kind: EntryKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<Report>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// PASS when the verdict matches the expectation; an error is a FAIL.
    pub outcome: Verdict,
}

impl SuiteResult {
    pub fn verdict(&self) -> Option<Verdict> {
        self.report.as_ref().map(|r| r.verdict)
    }
}

/// Worst outcome: FAIL over INCONCLUSIVE over PASS.
pub fn overall(results: &[SuiteResult]) -> Verdict {
    if results.iter().any(|r| r.outcome == Verdict::Fail) {
        Verdict::Fail
    } else if results.iter().any(|r| r.outcome == Verdict::Inconclusive) {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    }
}

fn cos_x() -> ScalarField {
    ScalarField::Axis {
        axis: 0,
        profile: Profile::Cos {
            amplitude: 1.0,
            frequency: 1.0,
        },
    }
}

fn x1(dim: usize) -> ScalarField {
    ScalarField::Linear {
        slope: Point::unit(dim, 0),
        offset: 0.0,
    }
}

fn interval_grid(cells: usize) -> GridSpec {
    GridSpec::Interval { a: 0.0, b: PI, cells }
}

fn be1(kappa: f64, opts: &CheckOptions) -> Result<Report, VerifyError> {
    let phi = ScalarField::Radial {
        center: Point::x(FRAC_PI_2),
        profile: Profile::Bump { bump: Bump::CosSquared },
    };
    check_be1_weakform(&interval_grid(opts.cells_or(512)), &ScalarField::constant(kappa), &cos_x(), &phi, opts)
}

fn run_entry(id: &str, cfg: &SuiteConfig) -> Result<Report, VerifyError> {
    let opts = cfg.opts(id);
    let zero = ScalarField::zero();
    let half_disc = || Domain::ball(Point::xy(0.0, 0.0), 0.5);
    let lt = |d: Domain, x0: Point| -> Result<Report, VerifyError> {
        Ok(local_time_consistency_mc(&d, &x0, PathHorizon(0.5), &cfg.mc(10_000, 1e-3), &opts.rng)?)
    };
    let ge1_ball = |ell: f64| -> Result<Report, VerifyError> {
        check_ge1(&half_disc()?, &zero, &ScalarField::constant(ell), &x1(2), SemigroupTime(0.1), &cfg.mc(2000, 1e-3), &opts)
    };
    let convexity = |weighted: bool| -> Result<Report, VerifyError> {
        let d = Domain::ball_complement(Point::xy(0.0, 0.0), 1.0)?;
        let psi = if weighted {
            convexification_weight(&d, &ScalarField::constant(-1.0), 0.05)?
        } else {
            ScalarField::zero()
        };
        let s = PairSampler::Boundary {
            pairs: 8,
            max_angle: FRAC_PI_2,
        };
        Ok(check_local_convexity(&d, &psi, &s, &ConvexityParams::default())?)
    };
    let ibp_f = ScalarField::Axis {
        axis: 0,
        profile: Profile::Sin {
            amplitude: 1.0,
            frequency: 2.0,
            phase: 0.0,
        },
    };
    let ibp_g = |dim: usize| ScalarField::Exp {
        field: Box::new(ScalarField::Linear {
            slope: if dim == 2 { Point::xy(0.5, 0.3) } else { Point::x(0.5) },
            offset: 0.0,
        }),
    };
    match id {
        "local-time-halfspace" => lt(Domain::half_space(2, 1, 0.0)?, Point::xy(0.0, 0.0)),
        "local-time-ball" => lt(Domain::ball(Point::xy(0.0, 0.0), 1.0)?, Point::xy(0.9, 0.0)),
        "local-time-complement" => lt(Domain::ball_complement(Point::origin(3), 1.0)?, Point::xyz(1.1, 0.0, 0.0)),
        "ge1-interval" => check_ge1(
            &Domain::interval(0.0, PI)?,
            &zero,
            &zero,
            &cos_x(),
            SemigroupTime(0.5),
            &cfg.mc(4000, 1e-3),
            &opts,
        ),
        "ge1-ball" => ge1_ball(2.0),
        "ge1-ball-control" => ge1_ball(20.0),
        "ge2-interval" => check_ge2(&interval_grid(opts.cells_or(512)), &zero, 1.0, &cos_x(), 0.3, &opts),
        "ge2-box" => {
            let n = opts.cells_or(64);
            let spec = GridSpec::Box {
                lo: [0.0, 0.0],
                hi: [PI, PI],
                cells: [n, n],
            };
            check_ge2(&spec, &zero, 2.0, &cos_x(), 0.3, &opts)
        }
        "ge2-dimension-control" => check_ge2(&interval_grid(opts.cells_or(256)), &zero, 0.5, &cos_x(), 0.3, &opts),
        "be1-flat" => be1(0.0, &opts),
        "be1-negative" => be1(-1.0, &opts),
        "be1-control" => be1(1.0, &opts),
        "ball-decay" => check_ball_decay(&BallDecayParams::new(0.5, 2, 2.0), &cfg.mc(2000, 2e-3), &opts),
        "ball-decay-control" => {
            let p = BallDecayParams {
                cot_scale: 0.0,
                ..BallDecayParams::new(0.5, 2, 2.0)
            };
            check_ball_decay(&p, &cfg.mc(2000, 2e-3), &opts)
        }
        "cball" => {
            let mut p = CballParams::new(1.0, 0.5);
            p.fit_times = vec![0.25, 0.5, 1.0];
            check_cball(&p, &cfg.mc(2000, 2e-3), &opts)
        }
        "cball-control" => check_cball(&CballParams::boundary_blind(1.0, 0.5), &cfg.mc(2000, 2e-3), &opts),
        "spectral-gap-r0.3" => check_spectral_gap(0.3, 2, &opts),
        "spectral-gap-r0.5" => check_spectral_gap(0.5, 2, &opts),
        "spectral-gap-r0.7" => check_spectral_gap(0.7, 2, &opts),
        "ibp-disc" => check_integration_by_parts(&Domain::ball(Point::xy(0.0, 0.0), 1.0)?, &ibp_f, &ibp_g(2), &opts),
        "ibp-interval" => check_integration_by_parts(&Domain::interval(0.0, 2.0)?, &ibp_f, &ibp_g(1), &opts),
        "convexity" => convexity(true),
        "convexity-control" => convexity(false),
        "evi-quadratic" => {
            let v = ScalarField::Quadratic {
                center: Point::xy(0.0, 0.0),
                scale: 0.8,
            };
            let r = evi_contraction(
                &v,
                &ScalarField::constant(0.8),
                &Point::xy(1.0, 0.0),
                &Point::xy(0.0, 1.0),
                2.0,
                0.1,
                &EviParams::default(),
            )?;
            Ok(r)
        }
        "evi-quartic" => {
            let v = ScalarField::Radial {
                center: Point::xy(0.0, 0.0),
                profile: Profile::Poly {
                    coeffs: vec![0.0, 0.0, 0.0, 0.0, 0.25],
                },
            };
            let ell = ScalarField::Quadratic {
                center: Point::xy(0.0, 0.0),
                scale: 2.0,
            };
            let r = evi_contraction(&v, &ell, &Point::xy(1.5, 0.0), &Point::xy(0.0, 1.2), 1.0, 0.05, &EviParams::default())?;
            Ok(r)
        }
        "cantor-weight" => Ok(cantor_weight(10, Bump::CosSquared)?.1),
        "cantor2" => cantor2_scenario(&Cantor2Params::new(1), &cfg.mc(2000, 1e-3), &opts),
        other => Err(VerifyError::InvalidParameter(format!("unknown check id {other:?}"))),
    }
}

/// Runs the named entries (or all of them for `["all"]`) concurrently. Results
/// come back in table order and depend only on the seed, not on the thread count.
pub fn run_suite(ids: &[String], cfg: &SuiteConfig) -> Result<Vec<SuiteResult>, VerifyError> {
    let selected: Vec<SuiteEntry> = if ids.iter().any(|i| i == "all") {
        SUITE.to_vec()
    } else {
        ids.iter()
            .map(|id| {
                SUITE
                    .iter()
                    .find(|e| e.id == id)
                    .copied()
                    .ok_or_else(|| VerifyError::InvalidParameter(format!("unknown check id {id:?}; known: {}", suite_ids().join(", "))))
            })
            .collect::<Result<_, _>>()?
    };
    let results = map_paths(selected.len(), |i| {
        let e = selected[i as usize];
        match run_entry(e.id, cfg) {
            Ok(report) => {
                let outcome = match (report.verdict, e.kind) {
                    (Verdict::Inconclusive, _) => Verdict::Inconclusive,
                    (v, _) if v == e.expected() => Verdict::Pass,
                    _ => Verdict::Fail,
                };
                SuiteResult {
                    id: e.id.to_string(),
                    kind: e.kind,
                    report: Some(report),
                    error: None,
                    outcome,
                }
            }
            Err(err) => SuiteResult {
                id: e.id.to_string(),
                kind: e.kind,
                report: None,
                error: Some(err.to_string()),
                outcome: Verdict::Fail,
            },
        }
    });
    Ok(results)
}

/// One row per entry, without runtimes, so that reruns compare byte for byte.
pub fn summary_csv(results: &[SuiteResult]) -> String {
    let mut out = String::from("id,kind,expected,verdict,outcome,comparisons,min_slack\n");
    for r in results {
        let kind = match r.kind {
            EntryKind::Check => "check",
            EntryKind::Control => "control",
        };
        let expected = match r.kind {
            EntryKind::Check => Verdict::Pass,
            EntryKind::Control => Verdict::Fail,
        };
        let (verdict, n, slack) = match &r.report {
            Some(rep) => (rep.verdict.to_string(), rep.lhs.len(), format!("{:.6e}", rep.min_slack())),
            None => ("ERROR".to_string(), 0, String::new()),
        };
        let _ = writeln!(out, "{},{kind},{expected},{verdict},{},{n},{slack}", r.id, r.outcome);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_unique_and_controls_exist() {
        let ids = suite_ids();
        let mut sorted = ids.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), ids.len());
        assert!(SUITE.iter().filter(|e| e.kind == EntryKind::Control).count() >= 5);
    }

    #[test]
    fn unknown_ids_are_rejected() {
        assert!(run_suite(&["nope".into()], &SuiteConfig::default()).is_err());
    }

    #[test]
    fn quick_entries_run_and_summarise() {
        let ids: Vec<String> = ["spectral-gap-r0.5", "be1-control", "ibp-interval"].iter().map(|s| s.to_string()).collect();
        let r = run_suite(&ids, &SuiteConfig::default()).unwrap();
        assert!(r.iter().all(|x| x.outcome == Verdict::Pass), "{r:?}");
        assert_eq!(overall(&r), Verdict::Pass);
        let csv = summary_csv(&r);
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.contains("be1-control,control,FAIL,FAIL,PASS"));
    }
}
