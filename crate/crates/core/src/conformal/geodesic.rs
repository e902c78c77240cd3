use serde::{Deserialize, Serialize};

use super::lbfgs::{self, dot};
use super::{ConformalError, Polyline};
use crate::geometry::{Point, ScalarField};

/// `Σ e^{(ψ(v_i) + ψ(v_{i+1}))/2} |v_{i+1} − v_i|`.
pub fn conformal_length(psi: &ScalarField, path: &Polyline) -> f64 {
    let v = path.vertices();
    let p: Vec<f64> = v.iter().map(|x| psi.value(x)).collect();
    (0..v.len() - 1)
        .map(|i| (0.5 * (p[i] + p[i + 1])).exp() * v[i].distance(&v[i + 1]))
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeodesicParams {
    pub segments: usize,
    pub max_iterations: usize,
    /// Stop when the energy gradient, relative to the size of its terms, is below this.
    pub tolerance: f64,
    /// First-variation length steps after the energy stage.
    pub polish_iterations: usize,
    /// Initial curve; the straight segment when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initializer: Option<Polyline>,
}

impl Default for GeodesicParams {
    fn default() -> Self {
        GeodesicParams {
            segments: 64,
            max_iterations: 20_000,
            tolerance: 1e-8,
            polish_iterations: 200,
            initializer: None,
        }
    }
}

impl GeodesicParams {
    pub fn with_segments(segments: usize) -> Self {
        GeodesicParams {
            segments,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Geodesic {
    pub path: Polyline,
    pub length: f64,
    pub initial_length: f64,
    pub iterations: usize,
    pub residual: f64,
}

struct Chain<'a> {
    psi: &'a ScalarField,
    start: Point,
    end: Point,
    dim: usize,
}

impl Chain<'_> {
    fn vertices(&self, x: &[f64]) -> Vec<Point> {
        let mut v = Vec::with_capacity(x.len() / self.dim + 2);
        v.push(self.start);
        for c in x.chunks_exact(self.dim) {
            v.push(Point::new(c).expect("dimension checked"));
        }
        v.push(self.end);
        v
    }

    fn flatten(&self, v: &[Point]) -> Vec<f64> {
        v[1..v.len() - 1].iter().flat_map(|p| p.coords().to_vec()).collect()
    }

    /// Values and gradients of ψ at the vertices (gradients for interior ones).
    fn jets(&self, v: &[Point]) -> Option<(Vec<f64>, Vec<Point>)> {
        let n = v.len() - 1;
        let mut p = Vec::with_capacity(n + 1);
        let mut g = vec![Point::origin(self.dim); n + 1];
        for (i, x) in v.iter().enumerate() {
            if i == 0 || i == n {
                p.push(self.psi.value(x));
            } else {
                let j = self.psi.jet(x).ok()?;
                p.push(j.value);
                g[i] = j.grad;
            }
        }
        p.iter().all(|x| x.is_finite()).then_some((p, g))
    }

    /// Discrete conformal energy `n Σ e^{ψ_i + ψ_{i+1}} |v_{i+1} − v_i|²`. Its
    /// minimizers are constant-speed curves with the same critical points as the
    /// length, and the problem stays well conditioned.
    fn energy(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        let v = self.vertices(x);
        let n = v.len() - 1;
        let (p, gp) = self.jets(&v)?;
        let nf = n as f64;
        let mut e = 0.0;
        let mut w = Vec::with_capacity(n);
        let mut d = Vec::with_capacity(n);
        for j in 0..n {
            let dj = v[j + 1] - v[j];
            let wj = (p[j] + p[j + 1]).exp();
            e += wj * dj.norm_sq();
            w.push(wj);
            d.push(dj);
        }
        let mut grad = vec![0.0; x.len()];
        for i in 1..n {
            let gi = (d[i - 1] * (2.0 * w[i - 1]) - d[i] * (2.0 * w[i])
                + gp[i] * (w[i - 1] * d[i - 1].norm_sq() + w[i] * d[i].norm_sq()))
                * nf;
            grad[(i - 1) * self.dim..i * self.dim].copy_from_slice(gi.coords());
        }
        Some((nf * e, grad))
    }

    fn energy_scale(&self, x: &[f64]) -> f64 {
        let v = self.vertices(x);
        let n = v.len() - 1;
        let p: Vec<f64> = v.iter().map(|y| self.psi.value(y)).collect();
        (0..n)
            .map(|j| (p[j] + p[j + 1]).exp() * v[j].distance(&v[j + 1]))
            .fold(0.0, f64::max)
            * 2.0
            * n as f64
    }

    /// Gradient of the discrete length with the tangential part removed at each
    /// vertex (the first variation).
    fn normal_length_gradient(&self, x: &[f64]) -> Option<(f64, Vec<f64>, f64)> {
        let v = self.vertices(x);
        let n = v.len() - 1;
        let (p, gp) = self.jets(&v)?;
        let mut a = Vec::with_capacity(n);
        let mut d = Vec::with_capacity(n);
        let mut len = 0.0;
        for j in 0..n {
            let dj = v[j + 1] - v[j];
            let aj = (0.5 * (p[j] + p[j + 1])).exp();
            len += aj * dj.norm();
            a.push(aj);
            d.push(dj);
        }
        let mut grad = vec![0.0; x.len()];
        for i in 1..n {
            let (l0, l1) = (d[i - 1].norm(), d[i].norm());
            if l0 == 0.0 || l1 == 0.0 {
                return None;
            }
            let mut gi = d[i - 1] * (a[i - 1] / l0) - d[i] * (a[i] / l1) + gp[i] * (0.5 * (a[i - 1] * l0 + a[i] * l1));
            let t = v[i + 1] - v[i - 1];
            let t = t * (1.0 / t.norm());
            gi = gi - t * gi.dot(&t);
            grad[(i - 1) * self.dim..i * self.dim].copy_from_slice(gi.coords());
        }
        let scale = a.iter().cloned().fold(0.0, f64::max);
        Some((len, grad, scale))
    }

    fn polish(&self, mut x: Vec<f64>, iterations: usize, tol: f64) -> Vec<f64> {
        for _ in 0..iterations {
            let Some((len, g, scale)) = self.normal_length_gradient(&x) else {
                break;
            };
            let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if gmax <= tol * scale {
                break;
            }
            let slope = -dot(&g, &g);
            let mut step = (x.len() as f64).recip().min(1.0) / gmax.max(1e-300) * 1e-2 * self.start.distance(&self.end);
            let mut moved = false;
            for _ in 0..40 {
                let trial: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - step * b).collect();
                let ok = Polyline::new(self.vertices(&trial)).is_ok();
                if ok {
                    if let Some((lt, _, _)) = self.normal_length_gradient(&trial) {
                        if lt <= len + 1e-4 * step * slope {
                            x = trial;
                            moved = true;
                            break;
                        }
                    }
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        x
    }
}

/// Local minimizer of the conformal length between `x` and `y`, by descent
/// from the initializer. The result is never longer than the initializer.
pub fn geodesic_with_info(
    psi: &ScalarField,
    x: &Point,
    y: &Point,
    params: &GeodesicParams,
) -> Result<Geodesic, ConformalError> {
    if x.dim() != y.dim() {
        return Err(ConformalError::InvalidParameter("endpoints differ in dimension".into()));
    }
    if x == y {
        return Err(ConformalError::InvalidParameter("endpoints must differ".into()));
    }
    psi.validate(x.dim())?;
    let init = match &params.initializer {
        Some(p) => {
            if p.start() != *x || p.end() != *y {
                return Err(ConformalError::InvalidParameter("initializer endpoints do not match".into()));
            }
            p.clone()
        }
        None => Polyline::segment(x, y, params.segments.max(2))?,
    };
    let initial_length = conformal_length(psi, &init);
    if init.segments() < 2 {
        return Ok(Geodesic {
            length: initial_length,
            path: init,
            initial_length,
            iterations: 0,
            residual: 0.0,
        });
    }
    let chain = Chain {
        psi,
        start: *x,
        end: *y,
        dim: x.dim(),
    };
    let x0 = chain.flatten(init.vertices());
    let scale = chain.energy_scale(&x0);
    let out = lbfgs::minimize(
        x0,
        |z| chain.energy(z),
        |_, g| g.iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale,
        params.tolerance,
        params.max_iterations,
        10,
    )
    .ok_or_else(|| ConformalError::InvalidParameter("ψ is not differentiable along the initializer".into()))?;
    let candidate = Polyline::new(chain.vertices(&out.x))?;
    if !out.converged {
        return Err(ConformalError::Convergence {
            iterations: out.iterations,
            residual: out.residual,
            last: Box::new(candidate),
        });
    }
    let polished = Polyline::new(chain.vertices(&chain.polish(out.x, params.polish_iterations, params.tolerance)))?;
    let length = conformal_length(psi, &polished);
    let (path, length) = if length <= initial_length {
        (polished, length)
    } else {
        (init, initial_length)
    };
    Ok(Geodesic {
        path,
        length,
        initial_length,
        iterations: out.iterations,
        residual: out.residual,
    })
}

pub fn geodesic(psi: &ScalarField, x: &Point, y: &Point, params: &GeodesicParams) -> Result<Polyline, ConformalError> {
    geodesic_with_info(psi, x, y, params).map(|g| g.path)
}

/// `d′(x, y)` as the conformal length of the computed geodesic.
pub fn conformal_distance(psi: &ScalarField, x: &Point, y: &Point, params: &GeodesicParams) -> Result<f64, ConformalError> {
    geodesic_with_info(psi, x, y, params).map(|g| g.length)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Domain, Profile};
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn log_radial() -> ScalarField {
        ScalarField::LogRadial {
            center: Point::xy(0.0, 0.0),
            radius: 1.0,
        }
    }

    fn bumpy() -> ScalarField {
        ScalarField::Axis {
            axis: 1,
            profile: Profile::Sin {
                amplitude: 0.4,
                frequency: 1.5,
                phase: 0.3,
            },
        }
        .plus(ScalarField::Quadratic {
            center: Point::xy(0.5, 0.0),
            scale: 0.3,
        })
    }

    #[test]
    fn length_examples() {
        let seg = Polyline::new(vec![Point::xy(0.0, 0.0), Point::xy(3.0, 4.0)]).unwrap();
        assert_eq!(conformal_length(&ScalarField::zero(), &seg), 5.0);
        let c = 0.7;
        assert!((conformal_length(&ScalarField::constant(c), &seg) - 5.0 * c.exp()).abs() < 1e-12);
        let arc = Polyline::new(
            (0..512)
                .map(|i| {
                    let t = FRAC_PI_2 * i as f64 / 511.0;
                    Point::xy(t.cos(), t.sin())
                })
                .collect(),
        )
        .unwrap();
        // chords are slightly shorter than the arc: O(Δθ²) relative
        assert!((conformal_length(&log_radial(), &arc) - FRAC_PI_2).abs() < 1e-4);
    }

    #[test]
    fn flat_metric_gives_the_segment() {
        let g = geodesic_with_info(&ScalarField::zero(), &Point::xy(0.0, 0.0), &Point::xy(1.0, 2.0), &GeodesicParams::default()).unwrap();
        assert!((g.length - 5f64.sqrt()).abs() < 1e-12);
        let c = 0.4;
        let d = conformal_distance(&ScalarField::constant(c), &Point::xy(0.0, 0.0), &Point::xy(1.0, 2.0), &GeodesicParams::default()).unwrap();
        assert!((d - c.exp() * 5f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn circle_is_totally_geodesic_for_the_log_weight() {
        let r = 0.5;
        let z = Point::xy(0.3, -0.2);
        let psi = ScalarField::LogRadial { center: z, radius: r };
        let x = z + Point::xy(r, 0.0);
        let y = z + Point::xy(0.0, r);
        let g = geodesic_with_info(&psi, &x, &y, &GeodesicParams::default()).unwrap();
        let dev = g.path.vertices().iter().map(|v| (v.distance(&z) - r).abs()).fold(0.0, f64::max);
        assert!(dev <= 1e-3 * r, "deviation {dev}");
        assert!((g.length - r * FRAC_PI_2).abs() < 5e-3 * r, "{}", g.length);
        assert!(g.length <= g.initial_length);
    }

    #[test]
    fn convexification_keeps_the_geodesic_outside_the_hole() {
        let d = Domain::ball_complement(Point::xy(0.0, 0.0), 1.0).unwrap();
        let psi = ScalarField::ConvexificationWeight {
            domain: d.clone(),
            ell: Box::new(ScalarField::constant(-1.0)),
            eps: 0.05,
        };
        let th: f64 = 0.2;
        let x = Point::xy(th.cos(), th.sin());
        let y = Point::xy(th.cos(), -th.sin());
        let g = geodesic(&psi, &x, &y, &GeodesicParams::default()).unwrap();
        let vmax = g.vertices().iter().map(|v| d.signed_distance(v)).fold(f64::MIN, f64::max);
        assert!(vmax <= 1e-3, "{vmax}");
        let chord = Polyline::segment(&x, &y, 64).unwrap();
        assert!(chord.vertices().iter().any(|v| d.signed_distance(v) > 1e-3));
    }

    #[test]
    fn mesh_convergence_is_second_order() {
        let psi = bumpy();
        let (x, y) = (Point::xy(-1.0, -0.5), Point::xy(1.0, 0.8));
        let d: Vec<f64> = [16, 32, 64]
            .iter()
            .map(|&n| conformal_distance(&psi, &x, &y, &GeodesicParams::with_segments(n)).unwrap())
            .collect();
        let order = ((d[0] - d[1]) / (d[1] - d[2])).abs().log2();
        assert!(order > 1.8, "{d:?} order {order}");
    }

    #[test]
    fn cylinder_distance() {
        let d = conformal_distance(&log_radial(), &Point::xy(1.0, 0.0), &Point::xy(0.0, 1.0), &GeodesicParams::default()).unwrap();
        assert!((d - FRAC_PI_2).abs() < 5e-3, "{d}");
        let _ = PI;
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn scaling_symmetry_and_monotonicity(
            ax in -1.5f64..1.5, ay in -1.5f64..1.5, bx in -1.5f64..1.5, by in -1.5f64..1.5, c in -1.0f64..1.0
        ) {
            let (x, y) = (Point::xy(ax, ay), Point::xy(bx, by));
            prop_assume!(x.distance(&y) > 0.1);
            let psi = bumpy();
            let p = GeodesicParams::with_segments(32);
            let g = geodesic_with_info(&psi, &x, &y, &p).unwrap();
            prop_assert!(g.length <= g.initial_length);
            let shifted = conformal_length(&psi.clone().plus(ScalarField::constant(c)), &g.path);
            prop_assert!((shifted - c.exp() * g.length).abs() <= 1e-12 * shifted.abs().max(1.0));
            let back = conformal_distance(&psi, &y, &x, &p).unwrap();
            prop_assert!((back - g.length).abs() <= 1e-6 * g.length);
        }

        #[test]
        fn triangle_inequality(
            pts in proptest::collection::vec((-1.5f64..1.5, -1.5f64..1.5), 3)
        ) {
            let q: Vec<Point> = pts.iter().map(|&(a, b)| Point::xy(a, b)).collect();
            prop_assume!(q[0].distance(&q[1]) > 0.1 && q[1].distance(&q[2]) > 0.1 && q[0].distance(&q[2]) > 0.1);
            let psi = bumpy();
            let p = GeodesicParams::with_segments(32);
            let d = |a: &Point, b: &Point| conformal_distance(&psi, a, b, &p).unwrap();
            let lhs = d(&q[0], &q[2]);
            let rhs = d(&q[0], &q[1]) + d(&q[1], &q[2]);
            prop_assert!(lhs <= rhs * (1.0 + 1e-3));
        }
    }
}
