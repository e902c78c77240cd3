use web_time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::ConformalError;
use crate::geometry::{Point, ScalarField};
use crate::report::Report;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EviParams {
    /// Local error tolerance of the step-doubling control (mixed absolute/relative).
    pub tolerance: f64,
    /// `|∇V|` beyond this counts as blow-up.
    pub max_gradient: f64,
    pub min_step: f64,
    /// Allowed relative excess of `d(x_t, y_t)` over the contraction bound.
    pub contraction_tolerance: f64,
}

impl Default for EviParams {
    fn default() -> Self {
        EviParams {
            tolerance: 1e-11,
            max_gradient: 1e8,
            min_step: 1e-14,
            contraction_tolerance: 1e-8,
        }
    }
}

/// States of a flow at the output times `k·dt`.
#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<Vec<Point>>,
    /// Extra scalar state integrated along (here `∫ℓ̄`), empty if none.
    pub integral: Vec<f64>,
    pub steps: usize,
}

type Rhs<'a> = dyn Fn(&[Point]) -> Result<(Vec<Point>, f64), ConformalError> + 'a;

fn rk4(f: &Rhs<'_>, y: &[Point], i: f64, h: f64) -> Result<(Vec<Point>, f64), ConformalError> {
    let add = |y: &[Point], k: &[Point], c: f64| -> Vec<Point> { y.iter().zip(k).map(|(a, b)| *a + *b * c).collect() };
    let (k1, j1) = f(y)?;
    let (k2, j2) = f(&add(y, &k1, 0.5 * h))?;
    let (k3, j3) = f(&add(y, &k2, 0.5 * h))?;
    let (k4, j4) = f(&add(y, &k3, h))?;
    let next = y
        .iter()
        .enumerate()
        .map(|(n, a)| *a + (k1[n] + k2[n] * 2.0 + k3[n] * 2.0 + k4[n]) * (h / 6.0))
        .collect();
    Ok((next, i + h / 6.0 * (j1 + 2.0 * j2 + 2.0 * j3 + j4)))
}

/// Classical RK4 with step doubling and local extrapolation, landing exactly on
/// every output time.
fn integrate(f: &Rhs<'_>, y0: Vec<Point>, horizon: f64, dt: f64, params: &EviParams) -> Result<Trajectory, ConformalError> {
    if !(dt > 0.0 && horizon >= 0.0 && dt.is_finite() && horizon.is_finite()) {
        return Err(ConformalError::InvalidParameter(format!("need dt > 0 and T ≥ 0, got dt = {dt}, T = {horizon}")));
    }
    let outputs = (horizon / dt).round() as usize;
    let mut traj = Trajectory {
        times: vec![0.0],
        points: vec![y0.clone()],
        integral: vec![0.0],
        steps: 0,
    };
    let (mut y, mut acc, mut t) = (y0, 0.0, 0.0);
    let mut h = dt;
    for k in 1..=outputs {
        let target = if k == outputs { horizon } else { k as f64 * dt };
        while t < target {
            let hh = h.min(target - t);
            let (full, i_full) = rk4(f, &y, acc, hh)?;
            let (mid, i_mid) = rk4(f, &y, acc, 0.5 * hh)?;
            let (two, i_two) = rk4(f, &mid, i_mid, 0.5 * hh)?;
            let scale = 1.0 + y.iter().map(|p| p.norm()).fold(acc.abs(), f64::max);
            let err = two
                .iter()
                .zip(&full)
                .map(|(a, b)| a.distance(b))
                .fold((i_two - i_full).abs(), f64::max)
                / 15.0;
            if err <= params.tolerance * scale {
                y = two.iter().zip(&full).map(|(a, b)| *a + (*a - *b) * (1.0 / 15.0)).collect();
                acc = i_two + (i_two - i_full) / 15.0;
                t = if hh == target - t { target } else { t + hh };
                traj.steps += 1;
                let grow = if err > 0.0 { 0.9 * (params.tolerance * scale / err).powf(0.2) } else { 2.0 };
                h = (hh * grow.clamp(0.2, 2.0)).min(dt);
            } else {
                h = hh * (0.9 * (params.tolerance * scale / err).powf(0.2)).clamp(0.1, 0.5);
                if h < params.min_step {
                    return Err(ConformalError::StepUnderflow { t });
                }
            }
        }
        traj.times.push(target);
        traj.points.push(y.clone());
        traj.integral.push(acc);
    }
    Ok(traj)
}

fn velocity(v: &ScalarField, x: &Point, params: &EviParams) -> Result<Point, ConformalError> {
    let g = v.gradient(x)?;
    let n = g.norm();
    if !(n <= params.max_gradient) {
        return Err(ConformalError::Divergence { t: f64::NAN, gradient: n });
    }
    Ok(-g)
}

/// Gradient flow `ẋ = −∇V(x)` from `x0` up to `T`, output every `dt`.
pub fn evi_flow(v: &ScalarField, x0: &Point, horizon: f64, dt: f64, params: &EviParams) -> Result<Trajectory, ConformalError> {
    v.validate(x0.dim())?;
    let f = |y: &[Point]| -> Result<(Vec<Point>, f64), ConformalError> { Ok((vec![velocity(v, &y[0], params)?], 0.0)) };
    let mut traj = integrate(&f, vec![*x0], horizon, dt, params)?;
    traj.integral.clear();
    Ok(traj)
}

/// 8-point Gauss–Legendre nodes and weights on `[0, 1]`.
pub(crate) const GAUSS: [(f64, f64); 8] = [
    (0.019855071751231912, 0.050614268145188344),
    (0.10166676129318664, 0.11119051722668717),
    (0.2372337950418355, 0.15685332293894352),
    (0.4082826787521751, 0.18134189168918088),
    (0.5917173212478248, 0.18134189168918088),
    (0.7627662049581645, 0.15685332293894352),
    (0.8983332387068134, 0.11119051722668717),
    (0.9801449282487681, 0.050614268145188344),
];

/// `ℓ̄(x, y)`: the average of `ℓ` along the segment, which is the unique
/// Euclidean geodesic.
pub(crate) fn segment_average(ell: &ScalarField, x: &Point, y: &Point) -> f64 {
    GAUSS.iter().map(|&(s, w)| w * ell.value(&x.lerp(y, s))).sum()
}

/// Runs the flows from `x0` and `y0` together with `∫ℓ̄(x_s, y_s) ds` and
/// compares `d(x_t, y_t)` with `e^{−∫ℓ̄} d(x0, y0)` at every output time.
pub fn evi_contraction(
    v: &ScalarField,
    ell: &ScalarField,
    x0: &Point,
    y0: &Point,
    horizon: f64,
    dt: f64,
    params: &EviParams,
) -> Result<Report, ConformalError> {
    let started = Instant::now();
    v.validate(x0.dim())?;
    ell.validate(x0.dim())?;
    let f = |y: &[Point]| -> Result<(Vec<Point>, f64), ConformalError> {
        Ok((
            vec![velocity(v, &y[0], params)?, velocity(v, &y[1], params)?],
            segment_average(ell, &y[0], &y[1]),
        ))
    };
    let traj = integrate(&f, vec![*x0, *y0], horizon, dt, params)?;
    let d0 = x0.distance(y0);
    let mut report = Report::new(
        "evi_contraction",
        json!({ "V": v, "ell": ell, "x0": x0, "y0": y0, "T": horizon, "dt": dt, "params": params }),
    )
    .clock("flow time of ẋ = −∇V");
    let mut gap = 0.0f64;
    for (pts, int) in traj.points.iter().zip(&traj.integral).skip(1) {
        let lhs = pts[0].distance(&pts[1]);
        let rhs = (-int).exp() * d0;
        gap = gap.max((lhs - rhs).abs() / d0);
        report.compare(lhs, rhs, 0.0, params.contraction_tolerance * d0);
    }
    report.diagnostic("max_relative_gap", gap);
    report.diagnostic("integrator_steps", traj.steps);
    Ok(report.finish(started))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::Verdict;

    #[test]
    fn gauss_rule_is_exact_for_polynomials() {
        let wsum: f64 = GAUSS.iter().map(|g| g.1).sum();
        assert!((wsum - 1.0).abs() < 1e-15);
        let m7: f64 = GAUSS.iter().map(|(s, w)| w * s.powi(7)).sum();
        assert!((m7 - 0.125).abs() < 1e-15);
    }

    #[test]
    fn linear_flow() {
        let lambda = 0.8;
        let v = ScalarField::Quadratic {
            center: Point::xy(0.0, 0.0),
            scale: lambda,
        };
        let x0 = Point::xy(1.0, -2.0);
        let tr = evi_flow(&v, &x0, 3.0, 0.25, &EviParams::default()).unwrap();
        for (t, p) in tr.times.iter().zip(&tr.points) {
            assert!(p[0].distance(&(x0 * (-lambda * t).exp())) < 1e-9);
        }
    }

    #[test]
    fn quadratic_saturates_the_bound() {
        let lambda = 1.3;
        let v = ScalarField::Quadratic {
            center: Point::xy(0.2, 0.0),
            scale: lambda,
        };
        let r = evi_contraction(&v, &ScalarField::constant(lambda), &Point::xy(1.0, 0.5), &Point::xy(-0.4, 1.1), 2.0, 0.1, &EviParams::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(r.diagnostics["max_relative_gap"].as_f64().unwrap() < 1e-6);
    }

    #[test]
    fn quartic_contracts_with_room_to_spare() {
        let v = ScalarField::Radial {
            center: Point::xy(0.0, 0.0),
            profile: crate::geometry::Profile::Poly {
                coeffs: vec![0.0, 0.0, 0.0, 0.0, 0.25],
            },
        };
        let ell = ScalarField::Quadratic {
            center: Point::xy(0.0, 0.0),
            scale: 2.0,
        };
        let r = evi_contraction(&v, &ell, &Point::xy(1.5, 0.0), &Point::xy(0.0, 1.2), 1.0, 0.05, &EviParams::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(r.min_slack() >= 0.0, "{}", r.min_slack());
    }

    #[test]
    fn blow_up_is_reported() {
        let v = ScalarField::Linear {
            slope: Point::xy(1e9, 0.0),
            offset: 0.0,
        };
        assert!(matches!(
            evi_flow(&v, &Point::xy(0.0, 0.0), 1.0, 0.1, &EviParams::default()),
            Err(ConformalError::Divergence { .. })
        ));
    }
}
