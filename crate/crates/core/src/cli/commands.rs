use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{json, Value};

use super::{CliError, Command, Format, Output, Settings};
use crate::conformal::{
    convexification_weight, evi_contraction, evi_flow, geodesic_with_info, EviParams, GeodesicParams,
};
use crate::geometry::{Bump, Domain, Point, Profile, ScalarField};
use crate::report::{Report, Verdict};
use crate::semigroup::{gradient_norm, neumann_heat, spectral_gap, Grid, GridSpec};
use crate::stochastic::{simulate_many, McParams, PathHorizon, RngSpec};
use crate::verify::{
    cantor2_scenario, cantor_weight, check_spectral_gap, overall, run_suite, summary_csv, Cantor2Params, CheckOptions,
    EntryKind, SuiteConfig, SUITE,
};

pub(super) fn dispatch(command: &Command, s: &Settings) -> Result<Output, CliError> {
    match command {
        Command::Simulate => simulate(s),
        Command::Geodesic { psi } => geodesic(s, psi.as_deref()),
        Command::Flow { potential } => flow(s, potential),
        Command::Heat => heat(s),
        Command::Spectrum => spectrum(s),
        Command::Verify { ids, list } => verify(s, ids, *list),
        Command::Cantor { level, bump, scenario } => cantor(s, *level, *bump, *scenario),
    }
}

fn options(s: &Settings, name: &str) -> CheckOptions {
    CheckOptions {
        rng: RngSpec::new(s.seed).named(name),
        cells: s.grid,
        tolerance_scale: s.tolerance_scale,
    }
}

fn pretty(v: &impl Serialize) -> String {
    serde_json::to_string_pretty(v).expect("values serialize") + "\n"
}

fn csv_row(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.12e}")).collect::<Vec<_>>().join(",")
}

fn coord_header(prefix: &str, dim: usize) -> String {
    (1..=dim).map(|i| format!("{prefix}{i}")).collect::<Vec<_>>().join(",")
}

/// Key/value summary: a two-row CSV, or a JSON object.
fn summary(format: Format, value: &Value) -> String {
    match format {
        Format::Json => pretty(value),
        Format::Csv => {
            let obj = value.as_object().expect("summaries are objects");
            let scalars: Vec<(&String, &Value)> = obj.iter().filter(|(_, v)| !v.is_object() && !v.is_array()).collect();
            let header: Vec<&str> = scalars.iter().map(|(k, _)| k.as_str()).collect();
            let row: Vec<String> = scalars
                .iter()
                .map(|(_, v)| match v {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect();
            format!("{}\n{}\n", header.join(","), row.join(","))
        }
    }
}

/// One line per report for CSV, the full reports for JSON.
fn reports_out(format: Format, reports: &[&Report]) -> String {
    match format {
        Format::Json => pretty(&reports),
        Format::Csv => {
            let mut out = String::from("check,verdict,comparisons,min_slack\n");
            for r in reports {
                let _ = writeln!(out, "{},{},{},{:.6e}", r.check, r.verdict, r.lhs.len(), r.min_slack());
            }
            out
        }
    }
}

fn default_start(domain: &Domain) -> Point {
    match domain {
        Domain::Interval { a, b } => Point::x(0.5 * (a + b)),
        Domain::Box { lo, hi } => lo.lerp(hi, 0.5),
        Domain::Ball { center, .. } => *center,
        Domain::BallComplement { center, radius } => *center + Point::unit(center.dim(), 0) * *radius,
        Domain::HalfSpace { dim, axis, level } => Point::unit(*dim, *axis) * *level,
    }
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, (var / n).sqrt())
}

fn simulate(s: &Settings) -> Result<Output, CliError> {
    let domain = match &s.domain {
        Some(d) => d.clone(),
        None => Domain::half_space(2, 1, 0.0)?,
    };
    let x0 = s.from.unwrap_or_else(|| default_start(&domain));
    let horizon = PathHorizon(s.t.unwrap_or(1.0));
    let h = s.dt.unwrap_or(1e-3);
    let n = s.paths.unwrap_or(1000);
    let rng = RngSpec::new(s.seed).named("simulate");
    let (paths, rejected) = simulate_many(&domain, &x0, horizon, h, n, &rng, false, None)?;
    let lt: Vec<f64> = paths.iter().map(|p| p.final_localtime()).collect();
    let (mean, se) = mean_se(&lt);
    let dim = domain.dim();
    let mut table = format!("path,L,{}\n", coord_header("x", dim));
    for (i, p) in paths.iter().enumerate() {
        let mut row = vec![p.final_localtime()];
        row.extend_from_slice(p.final_position().coords());
        let _ = writeln!(table, "{i},{}", csv_row(&row));
    }
    let mut trace = Vec::new();
    paths[0].write_csv(&mut trace)?;
    let value = json!({
        "domain": domain,
        "x0": x0,
        "horizon": horizon.0,
        "clock": "path clock, generator ½Δ",
        "h": h,
        "paths": paths.len(),
        "rejected": rejected,
        "mean_local_time": mean,
        "se": se,
    });
    Ok(Output {
        stdout: summary(s.format.unwrap_or(Format::Csv), &value),
        files: vec![
            ("local_time.csv".into(), table),
            ("trace.csv".into(), String::from_utf8(trace).expect("CSV is UTF-8")),
            ("summary.json".into(), pretty(&value)),
        ],
        verdict: None,
    })
}

fn named_psi(name: &str, s: &Settings, dim: usize) -> Result<ScalarField, CliError> {
    let r = s.radius.unwrap_or(1.0);
    Ok(match name {
        "flat" => ScalarField::zero(),
        "log-annulus" => ScalarField::LogRadial {
            center: Point::origin(dim),
            radius: r,
        },
        "convexification" => {
            let d = match &s.domain {
                Some(d) => d.clone(),
                None => Domain::ball_complement(Point::origin(dim), r)?,
            };
            convexification_weight(&d, &ScalarField::constant(-1.0), 0.05)?
        }
        "cantor" => Cantor2Params {
            level: s.level.unwrap_or(3),
            bump: s.bump.unwrap_or_default(),
            ..Default::default()
        }
        .weight(),
        other => {
            return Err(CliError::Config(format!(
                "unknown psi {other:?} (flat | log-annulus | convexification | cantor)"
            )))
        }
    })
}

fn geodesic(s: &Settings, psi_name: Option<&str>) -> Result<Output, CliError> {
    let r = s.radius.unwrap_or(1.0);
    let from = s.from.unwrap_or(Point::xy(r, 0.0));
    let to = s.to.unwrap_or(Point::xy(0.0, r));
    let dim = from.dim();
    let psi = match (psi_name, &s.psi) {
        (Some(name), _) => named_psi(name, s, dim)?,
        (None, Some(p)) => p.clone(),
        (None, None) => ScalarField::zero(),
    };
    let params = GeodesicParams {
        segments: s.grid.unwrap_or(64),
        ..Default::default()
    };
    let g = geodesic_with_info(&psi, &from, &to, &params)?;
    let domain = match &s.domain {
        Some(d) => d.clone(),
        None => Domain::ball(Point::origin(dim), r)?,
    };
    let mut csv = Vec::new();
    g.path.write_csv(&domain, &psi, &mut csv)?;
    let mut value = json!({
        "psi": psi,
        "from": from,
        "to": to,
        "length": g.length,
        "initial_length": g.initial_length,
        "euclidean_length": g.path.euclidean_length(),
        "iterations": g.iterations,
        "residual": g.residual,
    });
    if let ScalarField::LogRadial { center, radius } = &psi {
        let dev = g.path.vertices().iter().map(|v| (v.distance(center) - radius).abs()).fold(0.0, f64::max);
        value["max_radial_deviation"] = json!(dev);
    }
    let csv = String::from_utf8(csv).expect("CSV is UTF-8");
    let stdout = match s.format.unwrap_or(Format::Csv) {
        Format::Csv => csv.clone(),
        Format::Json => {
            let mut v = value.clone();
            v["vertices"] = json!(g.path.vertices());
            pretty(&v)
        }
    };
    Ok(Output {
        stdout,
        files: vec![("geodesic.csv".into(), csv), ("geodesic.json".into(), pretty(&value))],
        verdict: None,
    })
}

fn flow(s: &Settings, potential: &str) -> Result<Output, CliError> {
    let (v, ell) = match potential {
        "quadratic" => (
            ScalarField::Quadratic {
                center: Point::xy(0.0, 0.0),
                scale: 1.0,
            },
            ScalarField::constant(1.0),
        ),
        "quartic" => (
            ScalarField::Radial {
                center: Point::xy(0.0, 0.0),
                profile: Profile::Poly {
                    coeffs: vec![0.0, 0.0, 0.0, 0.0, 0.25],
                },
            },
            ScalarField::Quadratic {
                center: Point::xy(0.0, 0.0),
                scale: 2.0,
            },
        ),
        other => return Err(CliError::Config(format!("unknown potential {other:?} (quadratic | quartic)"))),
    };
    let v = s.f.clone().unwrap_or(v);
    let ell = s.ell.clone().unwrap_or(ell);
    let x0 = s.from.unwrap_or(Point::xy(1.5, 0.0));
    let y0 = s.to.unwrap_or(Point::xy(0.0, 1.2));
    let horizon = s.t.unwrap_or(1.0);
    let dt = s.dt.unwrap_or(0.05);
    let params = EviParams::default();
    let report = evi_contraction(&v, &ell, &x0, &y0, horizon, dt, &params)?;
    let tx = evi_flow(&v, &x0, horizon, dt, &params)?;
    let ty = evi_flow(&v, &y0, horizon, dt, &params)?;
    let dim = x0.dim();
    let mut csv = format!("t,{},{},distance,bound\n", coord_header("x", dim), coord_header("y", dim));
    let d0 = x0.distance(&y0);
    for (i, t) in tx.times.iter().enumerate() {
        let (d, b) = if i == 0 { (d0, d0) } else { (report.lhs[i - 1], report.rhs[i - 1]) };
        let mut row = vec![*t];
        row.extend_from_slice(tx.points[i][0].coords());
        row.extend_from_slice(ty.points[i][0].coords());
        row.extend([d, b]);
        let _ = writeln!(csv, "{}", csv_row(&row));
    }
    let stdout = match s.format.unwrap_or(Format::Csv) {
        Format::Csv => csv.clone(),
        Format::Json => pretty(&report),
    };
    let verdict = report.verdict;
    Ok(Output {
        stdout,
        files: vec![("trajectory.csv".into(), csv), ("report.json".into(), pretty(&report))],
        verdict: Some(verdict),
    })
}

fn heat_grid(domain: &Domain, cells: usize) -> Result<GridSpec, CliError> {
    Ok(match domain {
        Domain::Interval { a, b } => GridSpec::Interval { a: *a, b: *b, cells },
        Domain::Ball { center, radius } if center.dim() == 2 && center.norm() == 0.0 => GridSpec::Disc {
            radius: *radius,
            radial: cells,
            angular: 2 * cells,
        },
        Domain::Box { lo, hi } if lo.dim() == 2 => GridSpec::Box {
            lo: [lo.coord(0), lo.coord(1)],
            hi: [hi.coord(0), hi.coord(1)],
            cells: [cells, cells],
        },
        other => {
            return Err(CliError::Config(format!(
                "heat runs on intervals, origin-centred discs and rectangles, not {other:?}"
            )))
        }
    })
}

fn heat(s: &Settings) -> Result<Output, CliError> {
    let domain = match &s.domain {
        Some(d) => d.clone(),
        None => Domain::interval(0.0, PI)?,
    };
    let spec = heat_grid(&domain, s.grid.unwrap_or(128))?;
    let grid = Grid::new(spec)?;
    let f = match (&s.f, &domain) {
        (Some(f), _) => f.clone(),
        (None, Domain::Ball { .. }) => ScalarField::Linear {
            slope: Point::xy(1.0, 0.0),
            offset: 0.0,
        },
        (None, _) => ScalarField::Axis {
            axis: 0,
            profile: Profile::Cos {
                amplitude: 1.0,
                frequency: 1.0,
            },
        },
    };
    f.validate(domain.dim())?;
    let horizon = s.t.unwrap_or(0.5);
    let u0 = grid.sample(&f);
    let mut decay = String::from("t,sup_grad,l2_norm\n");
    let mut rows = Vec::new();
    let mut last = u0.clone();
    for k in 0..=10 {
        let t = horizon * k as f64 / 10.0;
        let u = neumann_heat(&grid, &u0, t)?;
        let g = gradient_norm(&grid, &u)?;
        let sq = crate::semigroup::GridFunction::new(u.values.iter().map(|v| v * v).collect());
        let row = [t, g.max(), grid.integrate(&sq).sqrt()];
        let _ = writeln!(decay, "{}", csv_row(&row));
        rows.push(row);
        last = u;
    }
    let dim = grid.nodes()[0].dim();
    let mut field = format!("{},u0,u\n", coord_header("x", dim));
    for (i, p) in grid.nodes().iter().enumerate() {
        let mut row = p.coords().to_vec();
        row.extend([u0.values[i], last.values[i]]);
        let _ = writeln!(field, "{}", csv_row(&row));
    }
    let stdout = match s.format.unwrap_or(Format::Csv) {
        Format::Csv => decay.clone(),
        Format::Json => pretty(&json!({
            "domain": domain,
            "f": f,
            "clock": "semigroup time, generator Δ",
            "decay": rows.iter().map(|r| json!({ "t": r[0], "sup_grad": r[1], "l2_norm": r[2] })).collect::<Vec<_>>(),
        })),
    };
    Ok(Output {
        stdout,
        files: vec![("decay.csv".into(), decay), ("field.csv".into(), field)],
        verdict: None,
    })
}

fn spectrum(s: &Settings) -> Result<Output, CliError> {
    let domain = match &s.domain {
        Some(d) => d.clone(),
        None => Domain::ball(Point::origin(2), s.radius.unwrap_or(0.5))?,
    };
    let (value, verdict) = match &domain {
        Domain::Ball { center, radius } if center.dim() == 2 => {
            let r = check_spectral_gap(*radius, 2, &options(s, "spectrum"))?;
            let d = &r.diagnostics;
            let v = json!({
                "domain": "disc",
                "radius": radius,
                "lambda1": d["lambda1"],
                "bound": d["bound"],
                "bessel_oracle": d["bessel_oracle"],
                "relative_error": d["relative_error"],
                "verdict": r.verdict,
            });
            (v, Some(r.verdict))
        }
        Domain::Interval { a, b } => {
            let g = spectral_gap(&Grid::new(GridSpec::Interval {
                a: *a,
                b: *b,
                cells: s.grid.unwrap_or(512),
            })?)?;
            let oracle = (PI / (b - a)).powi(2);
            let v = json!({
                "domain": "interval",
                "length": b - a,
                "lambda1": g.lambda1,
                "oracle": oracle,
                "relative_error": (g.lambda1 / oracle - 1.0).abs(),
                "iterations": g.iterations,
            });
            (v, None)
        }
        Domain::Box { lo, hi } if lo.dim() == 2 => {
            let n = s.grid.unwrap_or(64);
            let g = spectral_gap(&Grid::new(heat_grid(&domain, n)?)?)?;
            let side = (hi.coord(0) - lo.coord(0)).max(hi.coord(1) - lo.coord(1));
            let oracle = (PI / side).powi(2);
            let v = json!({
                "domain": "box",
                "lambda1": g.lambda1,
                "oracle": oracle,
                "relative_error": (g.lambda1 / oracle - 1.0).abs(),
                "iterations": g.iterations,
            });
            (v, None)
        }
        other => return Err(CliError::Config(format!("spectrum supports disc, interval and box, not {other:?}"))),
    };
    Ok(Output {
        stdout: summary(s.format.unwrap_or(Format::Json), &value),
        files: vec![("spectrum.json".into(), pretty(&value))],
        verdict,
    })
}

fn verify(s: &Settings, ids: &[String], list: bool) -> Result<Output, CliError> {
    if list {
        let mut out = String::from("id,kind,summary\n");
        for e in SUITE {
            let kind = match e.kind {
                EntryKind::Check => "check",
                EntryKind::Control => "control",
            };
            let _ = writeln!(out, "{},{kind},\"{}\"", e.id, e.summary);
        }
        return Ok(Output {
            stdout: out,
            files: Vec::new(),
            verdict: None,
        });
    }
    let ids: Vec<String> = if !ids.is_empty() {
        ids.to_vec()
    } else {
        s.checks.clone().unwrap_or_else(|| vec!["all".into()])
    };
    let cfg = SuiteConfig {
        seed: s.seed,
        paths: s.paths,
        dt: s.dt,
        cells: s.grid,
        tolerance_scale: s.tolerance_scale,
    };
    let results = run_suite(&ids, &cfg)?;
    let csv = summary_csv(&results);
    let stdout = match s.format.unwrap_or(Format::Csv) {
        Format::Csv => csv.clone(),
        Format::Json => {
            let rows: Vec<Value> = results
                .iter()
                .map(|r| {
                    json!({
                        "id": r.id,
                        "kind": r.kind,
                        "verdict": r.verdict(),
                        "outcome": r.outcome,
                        "comparisons": r.report.as_ref().map(|x| x.lhs.len()),
                        "min_slack": r.report.as_ref().map(|x| x.min_slack()),
                        "error": r.error,
                    })
                })
                .collect();
            pretty(&rows)
        }
    };
    Ok(Output {
        stdout,
        files: vec![("summary.csv".into(), csv), ("reports.json".into(), pretty(&results))],
        verdict: Some(overall(&results)),
    })
}

fn cantor(s: &Settings, level: Option<u32>, bump: Option<Bump>, scenario: bool) -> Result<Output, CliError> {
    let level = level.or(s.level).unwrap_or(3);
    let bump = bump.or(s.bump).unwrap_or_default();
    let (field, report) = cantor_weight(level, bump)?;
    let n = s.grid.unwrap_or(2000).max(2);
    let mut profile = String::from("x,phi,dphi,ddphi\n");
    let Some(p) = (match &field {
        ScalarField::Axis { profile, .. } => Some(profile),
        _ => None,
    }) else {
        unreachable!("cantor weights are axis fields")
    };
    for i in 0..=n {
        let x = i as f64 / n as f64;
        let (v, d, dd) = p.eval3(x);
        let _ = writeln!(profile, "{}", csv_row(&[x, v, d, dd]));
    }
    let mut reports = vec![report];
    if scenario {
        let mut mc = McParams::new(s.paths.unwrap_or(2000), s.dt.unwrap_or(1e-3));
        mc.antithetic = true;
        let params = Cantor2Params {
            level,
            bump,
            ..Default::default()
        };
        reports.push(cantor2_scenario(&params, &mc, &options(s, "cantor2"))?);
    }
    let refs: Vec<&Report> = reports.iter().collect();
    let verdict = reports.iter().fold(Verdict::Pass, |v, r| v.and(r.verdict));
    Ok(Output {
        stdout: reports_out(s.format.unwrap_or(Format::Csv), &refs),
        files: vec![("cantor_profile.csv".into(), profile), ("reports.json".into(), pretty(&reports))],
        verdict: Some(verdict),
    })
}

#[cfg(test)]
mod tests {
    use super::super::{run, Cli};
    use super::*;
    use clap::Parser;

    fn run_args(args: &[&str]) -> Output {
        run(&Cli::try_parse_from(std::iter::once("ricci-bounds").chain(args.iter().copied())).unwrap()).unwrap()
    }

    #[test]
    fn spectrum_of_the_half_disc() {
        let out = run_args(&["spectrum", "--domain", "disc", "--radius", "0.5"]);
        let v: Value = serde_json::from_str(&out.stdout).unwrap();
        assert!((v["lambda1"].as_f64().unwrap() / 13.56 - 1.0).abs() < 5e-3);
        assert!((v["bound"].as_f64().unwrap() - 1.675).abs() < 1e-3);
        assert_eq!(out.verdict, Some(Verdict::Pass));
    }

    #[test]
    fn log_annulus_geodesic_hugs_the_circle() {
        let out = run_args(&["geodesic", "--psi", "log-annulus", "--from", "1,0", "--to", "0,1", "--format", "json"]);
        let v: Value = serde_json::from_str(&out.stdout).unwrap();
        assert!(v["max_radial_deviation"].as_f64().unwrap() <= 1e-3);
        let csv = run_args(&["geodesic", "--psi", "log-annulus", "--from", "1,0", "--to", "0,1"]).stdout;
        assert!(csv.starts_with("s,x1,x2,V,psi\n"));
        assert_eq!(csv.lines().count(), 66);
    }

    #[test]
    fn small_commands_run() {
        let sim = run_args(&["simulate", "--paths", "50", "--t", "0.1", "--dt", "0.01", "--seed", "1"]);
        assert!(sim.stdout.starts_with("clock,domain") || sim.stdout.contains("mean_local_time"));
        assert_eq!(sim.files.len(), 3);
        let heat = run_args(&["heat", "--grid", "64", "--t", "0.2"]);
        assert_eq!(heat.stdout.lines().count(), 12);
        let flow = run_args(&["flow", "--potential", "quartic"]);
        assert_eq!(flow.verdict, Some(Verdict::Pass));
        let cantor = run_args(&["cantor", "--level", "4"]);
        assert_eq!(cantor.verdict, Some(Verdict::Pass));
        let list = run_args(&["verify", "--list"]);
        assert_eq!(list.stdout.lines().count(), SUITE.len() + 1);
    }

    #[test]
    fn heat_decay_matches_the_cosine_mode() {
        let out = run_args(&["heat", "--grid", "256", "--t", "1"]);
        let last = out.stdout.lines().last().unwrap();
        let cols: Vec<f64> = last.split(',').map(|c| c.parse().unwrap()).collect();
        assert!((cols[1] - (-1.0f64).exp()).abs() < 1e-3, "{last}");
    }
}
