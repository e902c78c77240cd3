//! Limited-memory BFGS with Armijo backtracking, for the geodesic energies.

use std::collections::VecDeque;

pub(crate) struct Outcome {
    pub x: Vec<f64>,
    #[allow(dead_code)]
    pub f: f64,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Minimizes `f` from `x0`. `eval` returns `None` where the objective is
/// undefined; such trial points are treated as `+∞`. `residual` maps the
/// gradient and value to the stopping measure compared against `tol`.
pub(crate) fn minimize(
    mut x: Vec<f64>,
    eval: impl Fn(&[f64]) -> Option<(f64, Vec<f64>)>,
    residual: impl Fn(&[f64], &[f64]) -> f64,
    tol: f64,
    max_iter: usize,
    memory: usize,
) -> Option<Outcome> {
    let (mut f, mut g) = eval(&x)?;
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(memory);
    let mut res = residual(&x, &g);
    let mut it = 0;
    while it < max_iter && res > tol {
        it += 1;
        let mut d = two_loop(&g, &hist);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            hist.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        let mut step = if hist.is_empty() {
            (1.0 / norm(&g).max(1e-300)).min(1.0)
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            if let Some((ft, gt)) = eval(&trial) {
                // Armijo, or near the optimum where value differences drown in
                // rounding, the approximate Wolfe test on the slope
                let armijo = ft <= f + 1e-4 * step * slope;
                let flat = (ft - f).abs() <= 1e-12 * f.abs().max(1e-300);
                let trial_slope = dot(&gt, &d);
                let wolfe = flat && trial_slope >= 0.9 * slope && trial_slope <= -0.8 * slope;
                if ft.is_finite() && (armijo || wolfe) {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            // no decrease possible at working precision
            break;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            if hist.len() == memory {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        x = xn;
        f = fn_;
        g = gn;
        res = residual(&x, &g);
    }
    Some(Outcome {
        converged: res <= tol,
        x,
        f,
        iterations: it,
        residual: res,
    })
}

fn two_loop(g: &[f64], hist: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alpha = vec![0.0; hist.len()];
    for (k, (s, y, rho)) in hist.iter().enumerate().rev() {
        alpha[k] = rho * dot(s, &q);
        axpy(-alpha[k], y, &mut q);
    }
    if let Some((s, y, _)) = hist.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for (k, (s, y, rho)) in hist.iter().enumerate() {
        let beta = rho * dot(y, &q);
        axpy(alpha[k] - beta, s, &mut q);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let eval = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            Some((f, g))
        };
        let out = minimize(vec![-1.2, 1.0], eval, |_, g| norm(g), 1e-10, 1000, 8).unwrap();
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-8 && (out.x[1] - 1.0).abs() < 1e-8);
        assert!(out.f < 1e-16);
    }
}
