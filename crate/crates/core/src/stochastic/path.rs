use std::io::Write;

use super::walker::{path_stream, run_path, StepRecord, Walker};
use super::{map_paths, PathHorizon, RngSpec, StochasticError};
use crate::geometry::{Domain, GeometryError, Point, ScalarField};

/// One stored reflected trajectory on a uniform path-clock grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PathSample {
    pub h: f64,
    pub times: Vec<f64>,
    pub positions: Vec<Point>,
    /// Accumulated push sum `L_{t_i}`.
    pub localtime: Vec<f64>,
    /// Per-step projection distances (`len = times.len() − 1`).
    pub pushes: Vec<f64>,
    /// Running `M^ψ_{t_i} = Σ ∇ψ(x_j)·ΔW_j` when a ψ was attached.
    pub stochint: Option<Vec<f64>>,
    /// Running `Σ Γ(ψ)(x_j) h`, the discrete bracket of `M^ψ`.
    pub quadvar: Option<Vec<f64>>,
    /// For time-changed paths: the original-clock time of each node.
    pub source_times: Option<Vec<f64>>,
}

impl PathSample {
    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn final_position(&self) -> Point {
        *self.positions.last().expect("paths have at least one node")
    }

    pub fn final_localtime(&self) -> f64 {
        *self.localtime.last().unwrap_or(&0.0)
    }

    /// Per-step trace with columns `t, x1..xn, L, Mpsi, push`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), StochasticError> {
        let dim = self.positions[0].dim();
        let xs: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
        writeln!(out, "t,{},L,Mpsi,push", xs.join(","))?;
        for i in 0..self.times.len() {
            let m = self.stochint.as_ref().map_or(0.0, |s| s[i]);
            let push = if i == 0 { 0.0 } else { self.pushes[i - 1] };
            let coords: Vec<String> = self.positions[i].coords().iter().map(|c| format!("{c:.12e}")).collect();
            writeln!(
                out,
                "{:.12e},{},{:.12e},{:.12e},{:.12e}",
                self.times[i],
                coords.join(","),
                self.localtime[i],
                m,
                push
            )?;
        }
        Ok(())
    }
}

struct Recorder<'f> {
    psi: Option<&'f ScalarField>,
    sample: PathSample,
}

impl Recorder<'_> {
    fn record(&mut self, s: &StepRecord) -> Result<(), GeometryError> {
        let p = &mut self.sample;
        p.times.push(s.t + p.h);
        p.positions.push(s.to);
        p.pushes.push(s.push);
        p.localtime.push(p.localtime.last().unwrap() + s.push);
        if let Some(psi) = self.psi {
            let g = psi.gradient(&s.from)?;
            let m = p.stochint.as_mut().unwrap();
            m.push(m.last().unwrap() + g.dot(&s.dw));
            let q = p.quadvar.as_mut().unwrap();
            q.push(q.last().unwrap() + g.norm_sq() * p.h);
        }
        Ok(())
    }
}

pub(crate) fn check_start(domain: &Domain, x0: &Point) -> Result<(), StochasticError> {
    if x0.dim() != domain.dim() {
        return Err(StochasticError::InvalidParameter(format!(
            "start point has dimension {}, domain has {}",
            x0.dim(),
            domain.dim()
        )));
    }
    if domain.signed_distance(x0) > 1e-12 {
        return Err(StochasticError::InvalidParameter(format!("start point {x0:?} lies outside the domain")));
    }
    Ok(())
}

/// Simulates path `index` of the family `rng` from `x0` to the path-clock
/// horizon with step `h`. With `psi`, the Itô sum `M^ψ` (left-point integrand)
/// and its bracket are accumulated.
pub fn simulate_reflected(
    domain: &Domain,
    x0: &Point,
    horizon: PathHorizon,
    h: f64,
    rng: &RngSpec,
    index: u64,
    psi: Option<&ScalarField>,
) -> Result<PathSample, StochasticError> {
    check_start(domain, x0)?;
    let steps = horizon.steps(h)?;
    simulate_inner(domain, x0, steps, h, rng, index, 1.0, psi).map_err(StochasticError::from)
}

#[allow(clippy::too_many_arguments)]
fn simulate_inner(
    domain: &Domain,
    x0: &Point,
    steps: usize,
    h: f64,
    rng: &RngSpec,
    stream: u64,
    sign: f64,
    psi: Option<&ScalarField>,
) -> Result<PathSample, GeometryError> {
    let mut rec = Recorder {
        psi,
        sample: PathSample {
            h,
            times: Vec::with_capacity(steps + 1),
            positions: Vec::with_capacity(steps + 1),
            localtime: Vec::with_capacity(steps + 1),
            pushes: Vec::with_capacity(steps),
            stochint: psi.map(|_| vec![0.0]),
            quadvar: psi.map(|_| vec![0.0]),
            source_times: None,
        },
    };
    rec.sample.times.push(0.0);
    rec.sample.positions.push(*x0);
    rec.sample.localtime.push(0.0);
    let walker = Walker::new(domain, h);
    let mut r = rng.path_rng(stream);
    run_path(&walker, x0, steps, &mut r, sign, &mut |s: &StepRecord| rec.record(s))?;
    Ok(rec.sample)
}

/// Simulates paths `0..n`; paths whose projection hits a singular point are
/// dropped and counted.
pub fn simulate_many(
    domain: &Domain,
    x0: &Point,
    horizon: PathHorizon,
    h: f64,
    n: usize,
    rng: &RngSpec,
    antithetic: bool,
    psi: Option<&ScalarField>,
) -> Result<(Vec<PathSample>, usize), StochasticError> {
    check_start(domain, x0)?;
    let steps = horizon.steps(h)?;
    let results = map_paths(n, |i| {
        let (stream, sign) = path_stream(i, antithetic);
        simulate_inner(domain, x0, steps, h, rng, stream, sign, psi)
    });
    let total = results.len();
    let paths: Vec<PathSample> = results.into_iter().filter_map(Result::ok).collect();
    let rejected = total - paths.len();
    if paths.is_empty() && n > 0 {
        return Err(StochasticError::AllRejected(n));
    }
    Ok((paths, rejected))
}

/// `−½ ∫ k(B_s) ds − ½ Σ ℓ(B_{t_{i+1}}) ΔL_i`, the time integral by the
/// trapezoid rule over the path grid.
pub fn fk_exponent(path: &PathSample, k: &ScalarField, ell: &ScalarField) -> f64 {
    let mut time_part = 0.0;
    if let Some(c) = k.as_constant() {
        time_part = c * path.horizon();
    } else {
        let vals: Vec<f64> = path.positions.iter().map(|x| k.value(x)).collect();
        for i in 0..vals.len() - 1 {
            time_part += 0.5 * (vals[i] + vals[i + 1]) * (path.times[i + 1] - path.times[i]);
        }
    }
    let boundary_part: f64 = path
        .pushes
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(i, &p)| ell.value(&path.positions[i + 1]) * p)
        .sum();
    -0.5 * time_part - 0.5 * boundary_part
}

/// `N^ψ_T = ψ(B_T) − ψ(B_0) − M^ψ_T`.
pub fn additive_functional_n(path: &PathSample, psi: &ScalarField) -> Result<f64, StochasticError> {
    let m = path.stochint.as_ref().ok_or(StochasticError::MissingFunctional)?;
    Ok(psi.value(&path.final_position()) - psi.value(&path.positions[0]) - m.last().unwrap())
}

/// `|log(e^{−M+½⟨M⟩} · e^{−½∫Γ(ψ)} · e^{ψ(B_T)−ψ(B_0)}) − N^ψ_T|` with the bracket
/// and the Γ-integral realized by the same discrete sum.
pub fn decomposition_identity(path: &PathSample, psi: &ScalarField) -> Result<f64, StochasticError> {
    let m = *path.stochint.as_ref().ok_or(StochasticError::MissingFunctional)?.last().unwrap();
    let q = *path.quadvar.as_ref().ok_or(StochasticError::MissingFunctional)?.last().unwrap();
    let girsanov = (-m + 0.5 * q).exp();
    let taming = (-0.5 * q).exp();
    let doob = (psi.value(&path.final_position()) - psi.value(&path.positions[0])).exp();
    let n = additive_functional_n(path, psi)?;
    Ok(((girsanov * taming * doob).ln() - n).abs())
}

/// Re-indexes the path to the clock of `e^{2ψ}`: `σ(t) = ∫₀ᵗ e^{2ψ(B_s)} ds`,
/// `B'_s = B_{τ(s)}` with `τ = σ⁻¹` by piecewise-linear inversion. The output
/// grid keeps the step `h` and stops at the last node below `σ(T)`.
pub fn time_change_path(path: &PathSample, psi: &ScalarField) -> Result<PathSample, StochasticError> {
    let n = path.times.len();
    let rate: Vec<f64> = path.positions.iter().map(|x| (2.0 * psi.value(x)).exp()).collect();
    let mut sigma = Vec::with_capacity(n);
    sigma.push(0.0);
    for i in 1..n {
        let s = sigma[i - 1] + 0.5 * (rate[i - 1] + rate[i]) * (path.times[i] - path.times[i - 1]);
        if !(s > sigma[i - 1]) {
            return Err(StochasticError::Clock(format!("σ is not strictly increasing at node {i}")));
        }
        sigma.push(s);
    }
    let h = path.h;
    let total = sigma[n - 1];
    let m = ((total / h) * (1.0 + 1e-12)).floor() as usize;
    let lerp = |v: &[f64], j: usize, w: f64| v[j] + w * (v[j + 1] - v[j]);
    let mut out = PathSample {
        h,
        times: Vec::with_capacity(m + 1),
        positions: Vec::with_capacity(m + 1),
        localtime: Vec::with_capacity(m + 1),
        pushes: Vec::with_capacity(m),
        stochint: path.stochint.as_ref().map(|_| Vec::with_capacity(m + 1)),
        quadvar: path.quadvar.as_ref().map(|_| Vec::with_capacity(m + 1)),
        source_times: Some(Vec::with_capacity(m + 1)),
    };
    let mut j = 0;
    for k in 0..=m {
        let s = (k as f64 * h).min(total);
        while j + 2 < n && sigma[j + 1] < s {
            j += 1;
        }
        let w = if sigma[j + 1] > sigma[j] {
            ((s - sigma[j]) / (sigma[j + 1] - sigma[j])).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.times.push(k as f64 * h);
        out.positions.push(path.positions[j].lerp(&path.positions[j + 1], w));
        out.localtime.push(lerp(&path.localtime, j, w));
        if let (Some(src), Some(dst)) = (&path.stochint, out.stochint.as_mut()) {
            dst.push(lerp(src, j, w));
        }
        if let (Some(src), Some(dst)) = (&path.quadvar, out.quadvar.as_mut()) {
            dst.push(lerp(src, j, w));
        }
        let tau = lerp(&path.times, j, w);
        let origin = match &path.source_times {
            Some(st) => lerp(st, j, w),
            None => tau,
        };
        out.source_times.as_mut().unwrap().push(origin);
    }
    for k in 1..out.localtime.len() {
        out.pushes.push(out.localtime[k] - out.localtime[k - 1]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Profile;
    use crate::stochastic::Estimate;

    fn half_line() -> Domain {
        Domain::half_space(1, 0, 0.0).unwrap()
    }

    fn sin_x1(dim: usize) -> ScalarField {
        let _ = dim;
        ScalarField::Axis {
            axis: 0,
            profile: Profile::Sin {
                amplitude: 1.0,
                frequency: 1.0,
                phase: 0.0,
            },
        }
    }

    #[test]
    fn sample_invariants() {
        let d = Domain::ball(Point::xy(0.0, 0.0), 1.0).unwrap();
        let rng = RngSpec::new(3);
        for i in 0..20 {
            let p = simulate_reflected(&d, &Point::xy(0.9, 0.0), PathHorizon(0.5), 1e-3, &rng, i, None).unwrap();
            assert_eq!(p.times.len(), 501);
            assert!(p.positions.iter().all(|x| d.signed_distance(x) <= 1e-12));
            for k in 1..p.localtime.len() {
                let inc = p.localtime[k] - p.localtime[k - 1];
                assert!(inc >= 0.0);
                assert_eq!(inc > 0.0, p.pushes[k - 1] > 0.0);
            }
            let total: f64 = p.pushes.iter().sum();
            assert!((total - p.final_localtime()).abs() < 1e-12);
        }
    }

    #[test]
    fn far_interior_paths_have_no_local_time() {
        let d = Domain::ball(Point::xy(0.0, 0.0), 1.0).unwrap();
        let (paths, rej) = simulate_many(&d, &Point::xy(0.0, 0.0), PathHorizon(0.01), 1e-3, 200, &RngSpec::new(1), false, None).unwrap();
        assert_eq!(rej, 0);
        assert!(paths.iter().all(|p| p.final_localtime() == 0.0));
    }

    #[test]
    fn unreflected_moments_in_a_large_box() {
        let d = Domain::cuboid(Point::xy(-5.0, -5.0), Point::xy(5.0, 5.0)).unwrap();
        let (paths, _) = simulate_many(&d, &Point::xy(0.0, 0.0), PathHorizon(0.1), 1e-2, 4000, &RngSpec::new(5), false, None).unwrap();
        let x: Vec<f64> = paths.iter().map(|p| p.final_position().coord(0)).collect();
        let x2: Vec<f64> = x.iter().map(|v| v * v).collect();
        let m1 = Estimate::from_samples(&x, false);
        let m2 = Estimate::from_samples(&x2, false);
        assert!(m1.mean.abs() < 3.0 * m1.se + 1e-12);
        assert!((m2.mean - 0.1).abs() < 3.0 * m2.se);
    }

    #[test]
    fn fk_exponent_examples() {
        let p = simulate_reflected(&half_line(), &Point::x(0.0), PathHorizon(1.0), 1e-2, &RngSpec::new(9), 0, None).unwrap();
        assert_eq!(fk_exponent(&p, &ScalarField::zero(), &ScalarField::zero()), 0.0);
        assert!((fk_exponent(&p, &ScalarField::constant(3.0), &ScalarField::zero()) + 1.5).abs() < 1e-12);
        let l = fk_exponent(&p, &ScalarField::zero(), &ScalarField::constant(2.0));
        assert!((l + p.final_localtime()).abs() < 1e-12);
        assert!(p.final_localtime() > 0.0);
    }

    #[test]
    fn additive_functional_examples() {
        let d = Domain::cuboid(Point::xy(-50.0, -50.0), Point::xy(50.0, 50.0)).unwrap();
        let rng = RngSpec::new(11);
        let c = ScalarField::constant(2.0);
        let p = simulate_reflected(&d, &Point::xy(0.0, 0.0), PathHorizon(1.0), 1e-3, &rng, 0, Some(&c)).unwrap();
        assert_eq!(additive_functional_n(&p, &c).unwrap(), 0.0);
        let lin = ScalarField::Linear {
            slope: Point::xy(1.0, -2.0),
            offset: 0.0,
        };
        let p = simulate_reflected(&d, &Point::xy(0.0, 0.0), PathHorizon(1.0), 1e-3, &rng, 1, Some(&lin)).unwrap();
        assert!(additive_functional_n(&p, &lin).unwrap().abs() < 1e-10);
        let none = simulate_reflected(&d, &Point::xy(0.0, 0.0), PathHorizon(0.1), 1e-3, &rng, 2, None).unwrap();
        assert!(matches!(additive_functional_n(&none, &lin), Err(StochasticError::MissingFunctional)));

        let quad = ScalarField::Quadratic {
            center: Point::xy(0.0, 0.0),
            scale: 1.0,
        };
        let (paths, _) = simulate_many(&d, &Point::xy(0.0, 0.0), PathHorizon(0.5), 1e-2, 2000, &rng, false, Some(&quad)).unwrap();
        let ns: Vec<f64> = paths.iter().map(|p| additive_functional_n(p, &quad).unwrap()).collect();
        let e = Estimate::from_samples(&ns, false);
        assert!((e.mean - 0.5).abs() < 3.0 * e.se + 1e-9, "{e:?}");
    }

    #[test]
    fn decomposition_residual_is_rounding_only() {
        let d = Domain::ball(Point::xy(0.0, 0.0), 2.0).unwrap();
        let psi = sin_x1(2);
        let (paths, _) = simulate_many(&d, &Point::xy(0.3, 0.1), PathHorizon(1.0), 1e-3, 50, &RngSpec::new(2), false, Some(&psi)).unwrap();
        for p in &paths {
            assert!(decomposition_identity(p, &psi).unwrap() <= 1e-12);
        }
        let c = ScalarField::constant(0.4);
        let p = simulate_reflected(&d, &Point::xy(0.0, 0.0), PathHorizon(0.1), 1e-3, &RngSpec::new(2), 0, Some(&c)).unwrap();
        assert_eq!(decomposition_identity(&p, &c).unwrap(), 0.0);
    }

    #[test]
    fn time_change_examples() {
        let d = Domain::ball(Point::xy(0.0, 0.0), 1.0).unwrap();
        let psi = sin_x1(2).scaled(0.5);
        let p = simulate_reflected(&d, &Point::xy(0.5, 0.0), PathHorizon(1.0), 1e-3, &RngSpec::new(4), 0, Some(&psi)).unwrap();

        let same = time_change_path(&p, &ScalarField::zero()).unwrap();
        assert_eq!(same.times.len(), p.times.len());
        for (a, b) in same.positions.iter().zip(&p.positions) {
            assert!(a.distance(b) < 1e-12);
        }

        let c = 0.3;
        let scaled = time_change_path(&p, &ScalarField::constant(c)).unwrap();
        for (s, src) in scaled.times.iter().zip(scaled.source_times.as_ref().unwrap()) {
            assert!((src - (-2.0 * c).exp() * s).abs() < 1e-12);
        }

        let there = time_change_path(&p, &psi).unwrap();
        let back = time_change_path(&there, &psi.clone().scaled(-1.0)).unwrap();
        let residual = back
            .times
            .iter()
            .zip(back.source_times.as_ref().unwrap())
            .map(|(t, s)| (t - s).abs())
            .fold(0.0, f64::max);
        assert!(residual <= 2.0 * p.h * (2.0f64 * 0.5).exp(), "{residual}");
        assert!(back.horizon() >= p.horizon() - 2.0 * p.h * std::f64::consts::E);
    }

    #[test]
    fn trace_csv() {
        let p = simulate_reflected(&half_line(), &Point::x(0.0), PathHorizon(0.01), 1e-3, &RngSpec::new(1), 0, None).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("t,x1,L,Mpsi,push\n"));
        assert_eq!(s.lines().count(), 12);
    }
}
