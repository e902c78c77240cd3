use web_time::Instant;

use serde_json::json;

use super::probe::ProbeGrid;
use super::{finish, CheckOptions, VerifyError, DISCRETIZATION_CONSTANT, GE2_FLOOR, GRID_CONSTANT};
use crate::geometry::{Domain, Point, ScalarField};
use crate::report::Report;
use crate::semigroup::{gradient_norm, neumann_heat, schrodinger_heat, Grid, GridFunction, GridSpec};
use crate::stochastic::{taming_expectation, McParams, SemigroupTime, TamingMode};

/// Default probes of [`check_ge1`] as `(abscissa, angle)`: points of an
/// interval, or radii on the `x₁` ray and the `x₂` ray of a ball or ball
/// complement (the boundary included).
pub fn ge1_probes(domain: &Domain) -> Result<Vec<(f64, f64)>, VerifyError> {
    const EQUATOR: f64 = std::f64::consts::FRAC_PI_2;
    let scaled = |base: f64, scale: f64, fr: &[(f64, f64)]| fr.iter().map(|(s, a)| (base + scale * s, *a)).collect();
    match domain {
        Domain::Interval { a, b } => Ok(scaled(*a, b - a, &[(0.1, 0.0), (0.3, 0.0), (0.5, 0.0), (0.7, 0.0), (0.9, 0.0), (1.0, 0.0)])),
        Domain::Ball { radius, .. } => Ok(scaled(
            0.0,
            *radius,
            &[(0.25, 0.0), (0.5, 0.0), (0.75, 0.0), (1.0, 0.0), (0.5, EQUATOR), (1.0, EQUATOR)],
        )),
        Domain::BallComplement { radius, .. } => Ok(scaled(
            0.0,
            *radius,
            &[(1.0, 0.0), (1.25, 0.0), (1.5, 0.0), (2.0, 0.0), (1.0, EQUATOR), (1.25, EQUATOR)],
        )),
        other => Err(VerifyError::Unsupported(format!("no gradient probes for {other:?}"))),
    }
}

fn default_cells(domain: &Domain) -> usize {
    match domain {
        Domain::Interval { .. } => 512,
        Domain::BallComplement { .. } => 200,
        _ => 400,
    }
}

/// GE₁ through the path representation: `|∇P_t f| ≤ E[e^{−½∫k − ½∫ℓ dL}|∇f|(B_{2t})]`
/// at each probe, the left side from the Neumann heat solver and the right side by
/// Monte Carlo.
pub fn check_ge1(
    domain: &Domain,
    k: &ScalarField,
    ell: &ScalarField,
    f: &ScalarField,
    t: SemigroupTime,
    mc: &McParams,
    opts: &CheckOptions,
) -> Result<Report, VerifyError> {
    let started = Instant::now();
    if !(t.0 > 0.0) {
        return Err(VerifyError::InvalidParameter(format!("t must be positive, got {}", t.0)));
    }
    let probes = ge1_probes(domain)?;
    let reach = 12.0 * t.0.sqrt().max(domain.length_scale());
    let pg = ProbeGrid::new(domain, f, &probes, opts.cells_or(default_cells(domain)), reach)?;
    let lhs = pg.heat_gradient(f, t.0, &probes)?;
    let points: Vec<Point> = probes.iter().map(|p| pg.point(*p)).collect();
    let mode = TamingMode::Gradient {
        k: k.clone(),
        ell: ell.clone(),
        f: f.clone(),
    };
    let horizon = t.path_horizon();
    let est = taming_expectation(domain, &mode, &points, t, mc, &opts.rng)?;
    if est.path_horizon != horizon.0 {
        return Err(VerifyError::Clock(format!(
            "paths ran to {} but semigroup time {} needs horizon {}",
            est.path_horizon, t.0, horizon.0
        )));
    }
    let hg = pg.grid.spacing();
    let mut report = Report::new(
        "ge1",
        json!({
            "domain": domain, "k": k, "ell": ell, "f": f, "t": t.0, "path_horizon": horizon.0,
            "mc": mc, "probes": probes, "grid": pg.grid.spec(), "seed": opts.rng,
        }),
    )
    .clock(t.clock_note());
    let rate = opts.tolerance_scale * DISCRETIZATION_CONSTANT * (mc.h.sqrt() + hg * hg);
    let mut allowance = Vec::with_capacity(probes.len());
    for (l, e) in lhs.iter().zip(&est.estimates) {
        let delta = rate * l.max(e.mean);
        allowance.push(delta);
        report.compare(*l, e.mean, e.se, delta + 3.0 * e.se);
    }
    report.diagnostic("allowance", allowance);
    report.diagnostic("cap_hits", est.cap_hits);
    report.diagnostic("rejected_paths", est.rejected);
    for w in est.warnings {
        report.warn(w);
    }
    if est.cap_hits > 0 {
        report.poison("exponent cap reached on some paths");
    }
    Ok(finish(report, started))
}

fn line_derivative(at: impl Fn(usize) -> f64, i: usize, n: usize, h: f64) -> f64 {
    if i == 0 {
        (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
    } else if i + 1 == n {
        (3.0 * at(i) - 4.0 * at(i - 1) + at(i - 2)) / (2.0 * h)
    } else {
        (at(i + 1) - at(i - 1)) / (2.0 * h)
    }
}

/// Nodewise partial derivatives on Interval and Box grids.
fn partials(grid: &Grid, v: &[f64]) -> Result<Vec<Vec<f64>>, VerifyError> {
    match grid.spec() {
        GridSpec::Interval { a, b, cells } => {
            let h = (b - a) / *cells as f64;
            Ok(vec![(0..v.len()).map(|i| line_derivative(|k| v[k], i, v.len(), h)).collect()])
        }
        GridSpec::Box { lo, hi, cells } => {
            let (mx, my) = (cells[0] + 1, cells[1] + 1);
            let hx = (hi[0] - lo[0]) / cells[0] as f64;
            let hy = (hi[1] - lo[1]) / cells[1] as f64;
            let mut dx = Vec::with_capacity(v.len());
            let mut dy = Vec::with_capacity(v.len());
            for i in 0..mx {
                for j in 0..my {
                    dx.push(line_derivative(|k| v[k * my + j], i, mx, hx));
                    dy.push(line_derivative(|k| v[i * my + k], j, my, hy));
                }
            }
            Ok(vec![dx, dy])
        }
        other => Err(VerifyError::Unsupported(format!("expected an interval or box grid, got {other:?}"))),
    }
}

fn flat_grid(spec: &GridSpec) -> Result<Grid, VerifyError> {
    match spec {
        GridSpec::Interval { .. } | GridSpec::Box { .. } => Ok(Grid::new(spec.clone())?),
        other => Err(VerifyError::Unsupported(format!("expected an interval or box grid, got {other:?}"))),
    }
}

fn sample_with<T>(grid: &Grid, f: impl Fn(&Point) -> Result<T, crate::geometry::GeometryError>) -> Result<Vec<T>, VerifyError> {
    grid.nodes().iter().map(|x| f(x).map_err(VerifyError::from)).collect()
}

/// GE₂(k, N): `Γ(P_t f) + (2t/N)e^{−2K₁t}(ΔP_t f)² ≤ P_t^{2k}Γ(f)` at every node,
/// `K₁ = sup k`, all three terms from the grid solvers.
pub fn check_ge2(
    spec: &GridSpec,
    k: &ScalarField,
    n: f64,
    f: &ScalarField,
    t: f64,
    opts: &CheckOptions,
) -> Result<Report, VerifyError> {
    let started = Instant::now();
    if !(n > 0.0) {
        return Err(VerifyError::InvalidParameter(format!("N must be positive, got {n}")));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(VerifyError::InvalidParameter(format!("t must be ≥ 0, got {t}")));
    }
    let grid = flat_grid(spec)?;
    let u = neumann_heat(&grid, &grid.sample(f), t)?;
    let grad = gradient_norm(&grid, &u)?;
    let lap = grid.laplacian(&u)?;
    let gamma_f = GridFunction::new(sample_with(&grid, |x| f.carre_du_champ(x))?);
    let k_sup = grid.sample(k).max();
    let rhs = schrodinger_heat(&grid, &gamma_f, &k.clone().scaled(2.0), t)?;
    let coef = 2.0 * t / n * (-2.0 * k_sup * t).exp();
    let hg = grid.spacing();
    let scale = rhs.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = opts.tolerance_scale * GRID_CONSTANT * hg * hg * scale + GE2_FLOOR;
    let mut report = Report::new(
        "ge2",
        json!({ "grid": spec, "k": k, "N": n, "f": f, "t": t, "K1": k_sup }),
    )
    .clock(format!("semigroup time t = {t} (generator Δ) on both sides"));
    for i in 0..grid.len() {
        let lhs = grad.values[i].powi(2) + coef * lap.values[i].powi(2);
        report.compare(lhs, rhs.values[i], 0.0, tol);
    }
    Ok(finish(report, started))
}

/// Weak Bochner inequality of BE₁(κ, ∞) tested against `φ ≥ 0`:
/// `∫κ Γ(f)^{½} φ ≤ −∫Γ(Γ(f)^{½}, φ) − ∫Γ(f)^{−½} Γ(f, Δf) φ`, by grid quadrature
/// over `{Γ(f) > ε}`.
pub fn check_be1_weakform(
    spec: &GridSpec,
    kappa: &ScalarField,
    f: &ScalarField,
    phi: &ScalarField,
    opts: &CheckOptions,
) -> Result<Report, VerifyError> {
    const GAMMA_FLOOR: f64 = 1e-10;
    let started = Instant::now();
    let grid = flat_grid(spec)?;
    let nodes = grid.nodes();
    let w = grid.weights();
    let df = sample_with(&grid, |x| f.gradient(x))?;
    let lap_f = sample_with(&grid, |x| f.laplacian(x))?;
    let dphi = sample_with(&grid, |x| phi.gradient(x))?;
    let phi_v: Vec<f64> = nodes.iter().map(|x| phi.value(x)).collect();
    if let Some(bad) = phi_v.iter().find(|v| **v < 0.0) {
        return Err(VerifyError::InvalidParameter(format!("test function must be ≥ 0, found {bad}")));
    }
    let g: Vec<f64> = df.iter().map(|d| d.norm()).collect();
    let dg = partials(&grid, &g)?;
    let dlap = partials(&grid, &lap_f)?;
    let dim = dg.len();
    let (mut bochner, mut curvature, mut scale) = (0.0, 0.0, 0.0);
    let (mut t1, mut t2) = (0.0, 0.0);
    let mut excluded = 0usize;
    for i in 0..grid.len() {
        if g[i] * g[i] <= GAMMA_FLOOR {
            excluded += 1;
            continue;
        }
        let a: f64 = -(0..dim).map(|d| dg[d][i] * dphi[i].coord(d)).sum::<f64>();
        let b: f64 = -(0..dim).map(|d| df[i].coord(d) * dlap[d][i]).sum::<f64>() / g[i] * phi_v[i];
        let c = kappa.value(&nodes[i]) * g[i] * phi_v[i];
        t1 += w[i] * a;
        t2 += w[i] * b;
        bochner += w[i] * (a + b);
        curvature += w[i] * c;
        scale += w[i] * (a.abs() + b.abs() + c.abs());
    }
    let hg = grid.spacing();
    let tol = opts.tolerance_scale * GRID_CONSTANT * hg * hg * scale;
    let mut report = Report::new(
        "be1_weakform",
        json!({ "grid": spec, "kappa": kappa, "f": f, "phi": phi, "gamma_floor": GAMMA_FLOOR }),
    )
    .clock("no clock: static inequality");
    report.compare(curvature, bochner, 0.0, tol);
    report.diagnostic("gradient_term", t1);
    report.diagnostic("bochner_term", t2);
    report.diagnostic("excluded_nodes", excluded);
    Ok(finish(report, started))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Bump, Profile};
    use crate::report::Verdict;
    use std::f64::consts::PI;

    fn cos_x() -> ScalarField {
        ScalarField::Axis {
            axis: 0,
            profile: Profile::Cos {
                amplitude: 1.0,
                frequency: 1.0,
            },
        }
    }

    fn interval_grid(cells: usize) -> GridSpec {
        GridSpec::Interval { a: 0.0, b: PI, cells }
    }

    #[test]
    fn ge2_interval_matches_the_eigen_expansion() {
        let t = 0.3;
        let r = check_ge2(&interval_grid(512), &ScalarField::zero(), 1.0, &cos_x(), t, &CheckOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        let h = PI / 512.0;
        for (i, (l, rhs)) in r.lhs.iter().zip(&r.rhs).enumerate() {
            let x = i as f64 * h;
            let el = (-2.0 * t).exp() * x.sin().powi(2) + 2.0 * t * (-2.0 * t).exp() * x.cos().powi(2);
            let er = 0.5 * (1.0 - (-4.0 * t).exp() * (2.0 * x).cos());
            assert!((l - el).abs() < 1e-4, "lhs at {x}: {l} vs {el}");
            assert!((rhs - er).abs() < 1e-5, "rhs at {x}: {rhs} vs {er}");
        }
    }

    #[test]
    fn ge2_constants_and_dimension_monotonicity() {
        let grid = interval_grid(256);
        let opts = CheckOptions::default();
        let c = check_ge2(&grid, &ScalarField::zero(), 1.0, &ScalarField::constant(2.0), 0.3, &opts).unwrap();
        assert_eq!(c.verdict, Verdict::Pass);
        assert!(c.lhs.iter().chain(&c.rhs).all(|v| v.abs() < 1e-12));
        let slacks: Vec<Vec<f64>> = [1.0, 2.0, 4.0]
            .iter()
            .map(|n| check_ge2(&grid, &ScalarField::zero(), *n, &cos_x(), 0.3, &opts).unwrap().slack)
            .collect();
        for i in 0..slacks[0].len() {
            assert!(slacks[0][i] <= slacks[1][i] && slacks[1][i] <= slacks[2][i]);
        }
        let low = check_ge2(&grid, &ScalarField::zero(), 0.5, &cos_x(), 0.3, &opts).unwrap();
        assert_eq!(low.verdict, Verdict::Fail);
    }

    #[test]
    fn ge2_box_product_case() {
        let spec = GridSpec::Box {
            lo: [0.0, 0.0],
            hi: [PI, PI],
            cells: [64, 64],
        };
        let r = check_ge2(&spec, &ScalarField::zero(), 2.0, &cos_x(), 0.3, &CheckOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Pass, "{}", r.min_slack());
    }

    fn bump_at_centre() -> ScalarField {
        ScalarField::Radial {
            center: Point::x(PI / 2.0),
            profile: Profile::Bump { bump: Bump::CosSquared },
        }
    }

    #[test]
    fn be1_flat_interval_is_an_identity() {
        let opts = CheckOptions::default();
        let spec = interval_grid(512);
        let zero = check_be1_weakform(&spec, &ScalarField::zero(), &cos_x(), &bump_at_centre(), &opts).unwrap();
        assert_eq!(zero.verdict, Verdict::Pass);
        // both sides vanish: −∫cos·φ′ = −∫sin·φ and the Bochner term is +∫sin·φ
        assert!(zero.slack[0].abs() < 1e-4, "{}", zero.slack[0]);
        let t1 = zero.diagnostics["gradient_term"].as_f64().unwrap();
        let t2 = zero.diagnostics["bochner_term"].as_f64().unwrap();
        // ∫ sin x cos²(π(x − π/2)) dx over |x − π/2| < ½
        let exact: f64 = {
            let n = 20000;
            let h = 1.0 / n as f64;
            (0..n)
                .map(|i| {
                    let s = -0.5 + (i as f64 + 0.5) * h;
                    (PI / 2.0 + s).sin() * (PI * s).cos().powi(2) * h
                })
                .sum()
        };
        assert!((t2 - exact).abs() < 1e-4 && (t1 + exact).abs() < 1e-4);
        let neg = check_be1_weakform(&spec, &ScalarField::constant(-1.0), &cos_x(), &bump_at_centre(), &opts).unwrap();
        assert_eq!(neg.verdict, Verdict::Pass);
        assert!(neg.slack[0] > zero.slack[0] + 0.5 * exact);
        let pos = check_be1_weakform(&spec, &ScalarField::constant(1.0), &cos_x(), &bump_at_centre(), &opts).unwrap();
        assert_eq!(pos.verdict, Verdict::Fail);
    }

    #[test]
    fn be1_rejects_signed_test_functions() {
        let phi = ScalarField::Axis {
            axis: 0,
            profile: Profile::Cos {
                amplitude: 1.0,
                frequency: 1.0,
            },
        };
        assert!(check_be1_weakform(&interval_grid(64), &ScalarField::zero(), &cos_x(), &phi, &CheckOptions::default()).is_err());
    }

    #[test]
    fn ge1_interval_eigenfunction() {
        let d = Domain::interval(0.0, PI).unwrap();
        let mut mc = McParams::new(4000, 1e-3);
        mc.antithetic = true;
        let r = check_ge1(&d, &ScalarField::zero(), &ScalarField::zero(), &cos_x(), SemigroupTime(0.5), &mc, &CheckOptions::seeded(3)).unwrap();
        assert_eq!(r.verdict, Verdict::Pass, "{:?}", r.slack);
        for ((x, _), l) in ge1_probes(&d).unwrap().iter().zip(&r.lhs) {
            assert!((l - (-0.5f64).exp() * x.sin().abs()).abs() < 1e-4);
        }
        assert!(r.clock_note.contains("2t = 1"));
    }

    #[test]
    fn ge1_ball_radial_and_its_control() {
        let d = Domain::ball(Point::xy(0.0, 0.0), 0.5).unwrap();
        let radial = ScalarField::Radial {
            center: Point::xy(0.0, 0.0),
            profile: Profile::Cos {
                amplitude: 1.0,
                frequency: 4.0,
            },
        };
        let mc = McParams::new(2000, 1e-3);
        let opts = CheckOptions::seeded(5);
        let r = check_ge1(&d, &ScalarField::zero(), &ScalarField::constant(2.0), &radial, SemigroupTime(0.5), &mc, &opts).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        let x1 = ScalarField::Linear {
            slope: Point::xy(1.0, 0.0),
            offset: 0.0,
        };
        let ok = check_ge1(&d, &ScalarField::zero(), &ScalarField::constant(2.0), &x1, SemigroupTime(0.1), &mc, &opts).unwrap();
        assert_eq!(ok.verdict, Verdict::Pass, "{:?}", ok.slack);
        let wrong = check_ge1(&d, &ScalarField::zero(), &ScalarField::constant(20.0), &x1, SemigroupTime(0.1), &mc, &opts).unwrap();
        assert_eq!(wrong.verdict, Verdict::Fail, "{:?}", wrong.slack);
    }
}
