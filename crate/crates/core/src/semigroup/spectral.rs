use std::f64::consts::PI;

use serde::Serialize;

use super::grid::{weighted_dot, Grid, GridSpec};
use super::solve::ShiftedOperator;
use super::SemigroupError;

const MAX_ITERATIONS: usize = 500;

/// Result of the inverse power iteration.
#[derive(Clone, Debug, Serialize)]
pub struct SpectralGap {
    pub lambda1: f64,
    pub iterations: usize,
    /// Weighted norm of `−Au − λ₁u` for the normalized eigenvector.
    pub residual: f64,
}

/// Smallest nonzero eigenvalue of the Neumann Laplacian `−Δ` on the grid, by
/// inverse iteration with the shift `−1` and deflation of constants.
pub fn spectral_gap(grid: &Grid) -> Result<SpectralGap, SemigroupError> {
    if matches!(grid.spec(), GridSpec::Radial { .. }) {
        return Err(SemigroupError::Grid(
            "spectral gaps are computed on Interval, Box or Disc grids".into(),
        ));
    }
    let n = grid.len();
    let w = grid.weights();
    let vol = grid.volume();
    let op = ShiftedOperator::plain(grid);
    let deflate = |u: &mut [f64]| {
        let m = weighted_dot(w, u, &vec![1.0; n]) / vol;
        u.iter_mut().for_each(|v| *v -= m);
        let nrm = weighted_dot(w, u, u).sqrt();
        u.iter_mut().for_each(|v| *v /= nrm);
    };
    // deterministic start with components in every low mode
    let mut u: Vec<f64> = grid
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, p)| p.coords().iter().sum::<f64>() + 0.1 * ((i as f64) * 0.7548776662).fract())
        .collect();
    deflate(&mut u);
    let mut au = vec![0.0; n];
    let rayleigh = |u: &[f64], au: &mut [f64]| {
        grid.lap.apply(u, au);
        -weighted_dot(w, u, au)
    };
    let mut lambda = rayleigh(&u, &mut au);
    for it in 1..=MAX_ITERATIONS {
        u = op.solve(1.0, &u)?;
        deflate(&mut u);
        let next = rayleigh(&u, &mut au);
        let done = (next - lambda).abs() <= 1e-13 * next.abs();
        lambda = next;
        if done {
            let r: Vec<f64> = au.iter().zip(&u).map(|(a, v)| -a - lambda * v).collect();
            return Ok(SpectralGap {
                lambda1: lambda,
                iterations: it,
                residual: weighted_dot(w, &r, &r).sqrt(),
            });
        }
    }
    Err(SemigroupError::Eigen(format!(
        "inverse iteration stagnated after {MAX_ITERATIONS} iterations at λ ≈ {lambda}"
    )))
}

/// `J_n(x)` from the integral `(1/π)∫₀^π cos(nτ − x sin τ) dτ` by the
/// trapezoid rule, which converges geometrically for this periodic integrand.
pub fn bessel_j(n: u32, x: f64) -> f64 {
    let m = 64 + 2 * (x.abs().ceil() as usize);
    let h = PI / m as f64;
    let f = |tau: f64| (n as f64 * tau - x * tau.sin()).cos();
    let mut s = 0.5 * (f(0.0) + f(PI));
    for k in 1..m {
        s += f(k as f64 * h);
    }
    s * h / PI
}

/// `J_n'(x)` from the recurrence `J_n' = J_{n−1} − (n/x) J_n` (and `J_0' = −J_1`).
pub fn bessel_j_prime(n: u32, x: f64) -> f64 {
    if n == 0 {
        -bessel_j(1, x)
    } else {
        bessel_j(n - 1, x) - n as f64 / x * bessel_j(n, x)
    }
}

/// First positive zero of `J_n'` (n ≥ 1) by scanning and bisection.
pub fn bessel_j_prime_first_zero(n: u32) -> f64 {
    assert!(n >= 1, "J_0' vanishes at the origin");
    let step = 0.05;
    let mut a = 0.5 * n as f64 + 1e-3;
    let mut fa = bessel_j_prime(n, a);
    loop {
        let b = a + step;
        let fb = bessel_j_prime(n, b);
        if fa * fb <= 0.0 {
            let (mut lo, mut hi, mut flo) = (a, b, fa);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                let fm = bessel_j_prime(n, mid);
                if flo * fm <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fm;
                }
            }
            return 0.5 * (lo + hi);
        }
        a = b;
        fa = fb;
    }
}

/// `(j'₁,₁ / r)²`, the first nonzero Neumann eigenvalue of the disc of radius `r`.
pub fn disc_gap_oracle(radius: f64) -> f64 {
    (bessel_j_prime_first_zero(1) / radius).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_values() {
        // tabulated values
        assert!((bessel_j(0, 1.0) - 0.7651976865579666).abs() < 1e-14);
        assert!((bessel_j(1, 2.5) - 0.4970941024642741).abs() < 1e-14);
        assert!((bessel_j_prime_first_zero(1) - 1.8411837813406593).abs() < 1e-12);
    }

    #[test]
    fn interval_gap_converges_to_classical_value() {
        let mut errs = Vec::new();
        for cells in [32, 64] {
            let g = Grid::new(GridSpec::Interval {
                a: 0.0,
                b: 2.0,
                cells,
            })
            .unwrap();
            let gap = spectral_gap(&g).unwrap();
            errs.push((gap.lambda1 - (PI / 2.0).powi(2)).abs());
        }
        assert!(errs[0] < 5e-3);
        assert!((errs[0] / errs[1]).log2() > 1.9);
    }

    #[test]
    fn box_gap_is_the_long_side_mode() {
        let g = Grid::new(GridSpec::Box {
            lo: [0.0, 0.0],
            hi: [1.0, 2.0],
            cells: [32, 64],
        })
        .unwrap();
        let gap = spectral_gap(&g).unwrap();
        assert!((gap.lambda1 - (PI / 2.0).powi(2)).abs() < 1e-3);
    }

    #[test]
    fn coarse_disc_gap() {
        let g = Grid::new(GridSpec::Disc {
            radius: 1.0,
            radial: 32,
            angular: 64,
        })
        .unwrap();
        let gap = spectral_gap(&g).unwrap();
        let exact = disc_gap_oracle(1.0);
        assert!((gap.lambda1 / exact - 1.0).abs() < 5e-3, "{} vs {exact}", gap.lambda1);
    }
}
