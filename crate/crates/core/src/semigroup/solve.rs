use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::grid::{weighted_dot, Grid, GridFunction, GridSpec};
use super::SemigroupError;
use crate::geometry::ScalarField;

/// Richardson levels: N, 2N, 4N and 8N implicit Euler steps.
const RICHARDSON_LEVELS: usize = 4;
const BASE_STEPS: usize = 32;
const MAX_BASE_STEPS: usize = 4096;
const STEP_TOL: f64 = 1e-10;

/// `e^{tΔ} f` with Neumann boundary conditions (semigroup clock, generator Δ).
pub fn neumann_heat(grid: &Grid, f: &GridFunction, t: f64) -> Result<GridFunction, SemigroupError> {
    schrodinger_heat_with_boundary(grid, f, &ScalarField::zero(), None, t)
}

/// `e^{t(Δ − κ)} f` with Neumann boundary conditions.
pub fn schrodinger_heat(
    grid: &Grid,
    f: &GridFunction,
    kappa: &ScalarField,
    t: f64,
) -> Result<GridFunction, SemigroupError> {
    schrodinger_heat_with_boundary(grid, f, kappa, None, t)
}

/// `e^{t(Δ − κ)} f` with the Robin condition `∂_{n_in} u = β u` in place of the
/// Neumann one, i.e. the semigroup of `∫|∇u|² + ∫κu² + ∫_∂ β u² dσ`.
pub fn schrodinger_heat_with_boundary(
    grid: &Grid,
    f: &GridFunction,
    kappa: &ScalarField,
    robin: Option<&ScalarField>,
    t: f64,
) -> Result<GridFunction, SemigroupError> {
    grid.check(f)?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(SemigroupError::InvalidParameter(format!("time must be ≥ 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(f.clone());
    }
    let op = ShiftedOperator::new(grid, kappa, robin)?;
    if let Some(c) = op.constant_shift() {
        if let Some(basis) = TensorCosine::for_grid(grid) {
            let mut u = f.values.clone();
            basis.apply_symbol(&mut u, |lambda| (-(lambda + c) * t).exp());
            return Ok(GridFunction::new(u));
        }
    }
    richardson(&op, &f.values, t).map(GridFunction::new)
}

/// Implicit Euler with Richardson extrapolation and step doubling on failure.
fn richardson(op: &ShiftedOperator<'_>, f: &[f64], t: f64) -> Result<Vec<f64>, SemigroupError> {
    let mut base = BASE_STEPS;
    loop {
        let mut table: Vec<Vec<Vec<f64>>> = Vec::with_capacity(RICHARDSON_LEVELS);
        for level in 0..RICHARDSON_LEVELS {
            let steps = base << level;
            let dt = t / steps as f64;
            let mut u = f.to_vec();
            for _ in 0..steps {
                u = op.solve(dt, &u)?;
            }
            let mut row = vec![u];
            for k in 1..=level {
                let fac = ((1usize << k) - 1) as f64;
                let (fine, coarse) = (&row[k - 1], &table[level - 1][k - 1]);
                let next = fine.iter().zip(coarse).map(|(a, b)| a + (a - b) / fac).collect();
                row.push(next);
            }
            table.push(row);
        }
        let last = &table[RICHARDSON_LEVELS - 1];
        let best = &last[RICHARDSON_LEVELS - 1];
        let prev = &last[RICHARDSON_LEVELS - 2];
        let scale = best.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let err = best.iter().zip(prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if err <= STEP_TOL * scale {
            return Ok(best.clone());
        }
        base *= 2;
        if base > MAX_BASE_STEPS {
            return Err(SemigroupError::Solver(format!(
                "time-step control failed: extrapolation error {err:.3e} at {} steps",
                base / 2
            )));
        }
    }
}

/// `M = I + s(D − A)` for the Neumann Laplacian `A` and a diagonal `D`
/// (potential plus Robin boundary terms).
pub(crate) struct ShiftedOperator<'g> {
    grid: &'g Grid,
    diag: Vec<f64>,
}

impl<'g> ShiftedOperator<'g> {
    pub(crate) fn new(
        grid: &'g Grid,
        kappa: &ScalarField,
        robin: Option<&ScalarField>,
    ) -> Result<Self, SemigroupError> {
        let mut diag: Vec<f64> = grid.nodes().iter().map(|x| kappa.value(x)).collect();
        if let Some(beta) = robin {
            for (i, x) in grid.nodes().iter().enumerate() {
                let b = grid.boundary_weights()[i];
                if b > 0.0 {
                    diag[i] += beta.value(x) * b / grid.weights()[i];
                }
            }
        }
        if diag.iter().any(|d| !d.is_finite()) {
            return Err(SemigroupError::InvalidParameter("potential is not finite on the grid".into()));
        }
        Ok(ShiftedOperator { grid, diag })
    }

    pub(crate) fn plain(grid: &'g Grid) -> Self {
        ShiftedOperator {
            grid,
            diag: vec![0.0; grid.len()],
        }
    }

    fn constant_shift(&self) -> Option<f64> {
        let c = self.diag[0];
        self.diag.iter().all(|&d| d == c).then_some(c)
    }

    /// Solves `(I + s(D − A)) x = b`.
    pub(crate) fn solve(&self, s: f64, b: &[f64]) -> Result<Vec<f64>, SemigroupError> {
        match self.grid.spec() {
            GridSpec::Interval { .. } | GridSpec::Radial { .. } => Ok(self.thomas(s, b)),
            GridSpec::Box { .. } => match (self.constant_shift(), TensorCosine::for_grid(self.grid)) {
                (Some(c), Some(basis)) => {
                    let mut x = b.to_vec();
                    basis.apply_symbol(&mut x, |lambda| 1.0 / (1.0 + s * (c + lambda)));
                    Ok(x)
                }
                _ => self.cg(s, b),
            },
            GridSpec::Disc { radial, angular, .. } => {
                let (nr, nt) = (*radial, *angular);
                let ring_constant =
                    (0..nr).all(|i| self.diag[i * nt..(i + 1) * nt].iter().all(|&d| d == self.diag[i * nt]));
                if ring_constant {
                    Ok(self.disc_fft(s, b, nr, nt))
                } else {
                    self.cg(s, b)
                }
            }
        }
    }

    fn thomas(&self, s: f64, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let lap = &self.grid.lap;
        let (mut lo, mut di, mut up) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for i in 0..n {
            for (c, v) in lap.row(i) {
                if c + 1 == i {
                    lo[i] = -s * v;
                } else if c == i {
                    di[i] = 1.0 + s * (self.diag[i] - v);
                } else {
                    up[i] = -s * v;
                }
            }
        }
        tridiagonal_solve(&lo, &di, &up, b)
    }

    fn disc_fft(&self, s: f64, b: &[f64], nr: usize, nt: usize) -> Vec<f64> {
        let lap = &self.grid.lap;
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(nt);
        let inv = planner.plan_fft_inverse(nt);
        let mut spec: Vec<Complex64> = b.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        for ring in spec.chunks_mut(nt) {
            fwd.process(ring);
        }
        // ring coefficients read back from the assembled stencil
        let mut inner = vec![0.0; nr];
        let mut outer = vec![0.0; nr];
        let mut ang = vec![0.0; nr];
        for i in 0..nr {
            for (c, v) in lap.row(i * nt) {
                if i > 0 && c == (i - 1) * nt {
                    inner[i] = v;
                } else if c == (i + 1) * nt {
                    outer[i] = v;
                } else if c == i * nt + 1 {
                    ang[i] = v;
                }
            }
        }
        let (mut lo, mut di, mut up) = (vec![0.0; nr], vec![0.0; nr], vec![0.0; nr]);
        let (mut re, mut im) = (vec![0.0; nr], vec![0.0; nr]);
        for m in 0..nt {
            let mu = 4.0 * (PI * m as f64 / nt as f64).sin().powi(2);
            for i in 0..nr {
                lo[i] = -s * inner[i];
                up[i] = -s * outer[i];
                di[i] = 1.0 + s * (self.diag[i * nt] + inner[i] + outer[i] + mu * ang[i]);
                re[i] = spec[i * nt + m].re;
                im[i] = spec[i * nt + m].im;
            }
            let xr = tridiagonal_solve(&lo, &di, &up, &re);
            let xi = tridiagonal_solve(&lo, &di, &up, &im);
            for i in 0..nr {
                spec[i * nt + m] = Complex64::new(xr[i], xi[i]);
            }
        }
        for ring in spec.chunks_mut(nt) {
            inv.process(ring);
        }
        spec.iter().map(|c| c.re / nt as f64).collect()
    }

    /// Jacobi-preconditioned conjugate gradients in the weighted inner product,
    /// in which `M` is self-adjoint.
    fn cg(&self, s: f64, b: &[f64]) -> Result<Vec<f64>, SemigroupError> {
        let n = b.len();
        let w = self.grid.weights();
        let lap = &self.grid.lap;
        let apply = |x: &[f64], out: &mut [f64]| {
            lap.apply(x, out);
            for i in 0..n {
                out[i] = x[i] + s * (self.diag[i] * x[i] - out[i]);
            }
        };
        let pre: Vec<f64> = (0..n).map(|i| 1.0 / (1.0 + s * (self.diag[i] - lap.diag(i)))).collect();
        let mut x = b.to_vec();
        let mut r = vec![0.0; n];
        apply(&x, &mut r);
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
        let mut z: Vec<f64> = r.iter().zip(&pre).map(|(a, p)| a * p).collect();
        let mut p = z.clone();
        let mut rz = weighted_dot(w, &r, &z);
        let bnorm = weighted_dot(w, b, b).sqrt().max(f64::MIN_POSITIVE);
        let mut q = vec![0.0; n];
        for _ in 0..(10 * n).max(100) {
            if weighted_dot(w, &r, &r).sqrt() <= 1e-14 * bnorm {
                return Ok(x);
            }
            apply(&p, &mut q);
            let alpha = rz / weighted_dot(w, &p, &q);
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * q[i];
                z[i] = r[i] * pre[i];
            }
            let rz_new = weighted_dot(w, &r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(SemigroupError::Solver("conjugate gradients did not converge".into()))
    }
}

pub(crate) fn tridiagonal_solve(lo: &[f64], di: &[f64], up: &[f64], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = up[0] / di[0];
    d[0] = b[0] / di[0];
    for i in 1..n {
        let m = di[i] - lo[i] * c[i - 1];
        c[i] = up[i] / m;
        d[i] = (b[i] - lo[i] * d[i - 1]) / m;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    x
}

/// Eigenbasis `cos(kπi/N)` of the vertex-grid Neumann Laplacian, per axis.
struct CosineBasis {
    m: usize,
    basis: Vec<f64>,
    norms: Vec<f64>,
    trap: Vec<f64>,
    eig: Vec<f64>,
}

impl CosineBasis {
    fn new(n: usize, h: f64) -> Self {
        let m = n + 1;
        let mut basis = vec![0.0; m * m];
        for k in 0..m {
            for i in 0..m {
                basis[k * m + i] = (PI * ((k * i) % (2 * n)) as f64 / n as f64).cos();
            }
        }
        let trap: Vec<f64> = (0..m).map(|i| if i == 0 || i == n { 0.5 } else { 1.0 }).collect();
        let norms = (0..m)
            .map(|k| (0..m).map(|i| trap[i] * basis[k * m + i].powi(2)).sum())
            .collect();
        let eig = (0..m)
            .map(|k| 4.0 / (h * h) * (PI * k as f64 / (2.0 * n as f64)).sin().powi(2))
            .collect();
        CosineBasis {
            m,
            basis,
            norms,
            trap,
            eig,
        }
    }

    fn forward(&self, u: &[f64], out: &mut [f64]) {
        for k in 0..self.m {
            let row = &self.basis[k * self.m..(k + 1) * self.m];
            let s: f64 = row.iter().zip(u).zip(&self.trap).map(|((b, u), t)| b * u * t).sum();
            out[k] = s / self.norms[k];
        }
    }

    fn backward(&self, c: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for k in 0..self.m {
            let row = &self.basis[k * self.m..(k + 1) * self.m];
            for (o, b) in out.iter_mut().zip(row) {
                *o += c[k] * b;
            }
        }
    }
}

/// Tensor-product cosine transform for Interval and Box grids.
pub(crate) struct TensorCosine {
    axes: Vec<CosineBasis>,
}

impl TensorCosine {
    pub(crate) fn for_grid(grid: &Grid) -> Option<Self> {
        match grid.spec() {
            GridSpec::Interval { a, b, cells } => Some(TensorCosine {
                axes: vec![CosineBasis::new(*cells, (b - a) / *cells as f64)],
            }),
            GridSpec::Box { lo, hi, cells } => Some(TensorCosine {
                axes: (0..2)
                    .map(|d| CosineBasis::new(cells[d], (hi[d] - lo[d]) / cells[d] as f64))
                    .collect(),
            }),
            _ => None,
        }
    }

    /// `u ← g(−A) u` for a scalar symbol `g` of the eigenvalue of `−A`.
    pub(crate) fn apply_symbol(&self, u: &mut [f64], g: impl Fn(f64) -> f64) {
        match self.axes.as_slice() {
            [x] => {
                let mut c = vec![0.0; x.m];
                x.forward(u, &mut c);
                for (ck, lam) in c.iter_mut().zip(&x.eig) {
                    *ck *= g(*lam);
                }
                x.backward(&c, u);
            }
            [x, y] => {
                let (mx, my) = (x.m, y.m);
                let mut col = vec![0.0; mx];
                let mut tmp = vec![0.0; mx];
                // transform along x for every j, then along y for every k
                for j in 0..my {
                    for i in 0..mx {
                        col[i] = u[i * my + j];
                    }
                    x.forward(&col, &mut tmp);
                    for i in 0..mx {
                        u[i * my + j] = tmp[i];
                    }
                }
                let mut row = vec![0.0; my];
                for k in 0..mx {
                    let line = &mut u[k * my..(k + 1) * my];
                    y.forward(line, &mut row);
                    for (l, r) in row.iter_mut().enumerate() {
                        *r *= g(x.eig[k] + y.eig[l]);
                    }
                    y.backward(&row, line);
                }
                for j in 0..my {
                    for i in 0..mx {
                        col[i] = u[i * my + j];
                    }
                    x.backward(&col, &mut tmp);
                    for i in 0..mx {
                        u[i * my + j] = tmp[i];
                    }
                }
            }
            _ => unreachable!("tensor cosine transforms are built for one or two axes"),
        }
    }
}

/// Nodewise `|∇u|`: centred differences inside, second-order one-sided
/// differences at the boundary. On a radial mode grid this is `|∂ρ u|`.
pub fn gradient_norm(grid: &Grid, u: &GridFunction) -> Result<GridFunction, SemigroupError> {
    grid.check(u)?;
    let v = &u.values;
    let out = match grid.spec() {
        GridSpec::Interval { a, b, cells } => {
            let h = (b - a) / *cells as f64;
            (0..v.len()).map(|i| line_derivative(|k| v[k], i, v.len(), h).abs()).collect()
        }
        GridSpec::Box { lo, hi, cells } => {
            let (mx, my) = (cells[0] + 1, cells[1] + 1);
            let hx = (hi[0] - lo[0]) / cells[0] as f64;
            let hy = (hi[1] - lo[1]) / cells[1] as f64;
            let mut out = Vec::with_capacity(v.len());
            for i in 0..mx {
                for j in 0..my {
                    let dx = line_derivative(|k| v[k * my + j], i, mx, hx);
                    let dy = line_derivative(|k| v[i * my + k], j, my, hy);
                    out.push(dx.hypot(dy));
                }
            }
            out
        }
        GridSpec::Disc {
            radius,
            radial,
            angular,
        } => {
            let (nr, nt) = (*radial, *angular);
            let dr = radius / nr as f64;
            let dth = 2.0 * PI / nt as f64;
            let mut out = Vec::with_capacity(v.len());
            for i in 0..nr {
                let rho = (i as f64 + 0.5) * dr;
                for j in 0..nt {
                    let at = |ii: usize, jj: usize| v[ii * nt + jj % nt];
                    let dr_u = if i == 0 && nt % 2 == 0 {
                        (at(1, j) - at(0, j + nt / 2)) / (2.0 * dr)
                    } else if i + 1 == nr {
                        (3.0 * at(i, j) - 4.0 * at(i - 1, j) + at(i - 2, j)) / (2.0 * dr)
                    } else if i == 0 {
                        (-3.0 * at(0, j) + 4.0 * at(1, j) - at(2, j)) / (2.0 * dr)
                    } else {
                        (at(i + 1, j) - at(i - 1, j)) / (2.0 * dr)
                    };
                    let dt_u = (at(i, j + 1) - at(i, j + nt - 1)) / (2.0 * dth * rho);
                    out.push(dr_u.hypot(dt_u));
                }
            }
            out
        }
        GridSpec::Radial {
            r_in,
            r_out,
            cells,
            mode,
            ..
        } => {
            let n = *cells;
            let h = (r_out - r_in) / n as f64;
            (0..n)
                .map(|i| {
                    let d = if i == 0 && *r_in == 0.0 {
                        let ghost = if mode % 2 == 0 { v[0] } else { -v[0] };
                        (v[1] - ghost) / (2.0 * h)
                    } else {
                        line_derivative(|k| v[k], i, n, h)
                    };
                    d.abs()
                })
                .collect()
        }
    };
    Ok(GridFunction::new(out))
}

fn line_derivative(at: impl Fn(usize) -> f64, i: usize, n: usize, h: f64) -> f64 {
    if i == 0 {
        (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
    } else if i + 1 == n {
        (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h)
    } else {
        (at(i + 1) - at(i - 1)) / (2.0 * h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point, Profile};
    use proptest::prelude::*;

    trait MaxDiff {
        fn max_abs_diff_slice(&self, other: &[f64]) -> f64;
    }

    impl MaxDiff for [f64] {
        fn max_abs_diff_slice(&self, other: &[f64]) -> f64 {
            self.iter().zip(other).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        }
    }

    fn interval(cells: usize) -> Grid {
        Grid::new(GridSpec::Interval { a: 0.0, b: PI, cells }).unwrap()
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

    #[test]
    fn constants_are_invariant() {
        for spec in [
            GridSpec::Interval { a: 0.0, b: 1.0, cells: 20 },
            GridSpec::Box {
                lo: [0.0, 0.0],
                hi: [1.0, 2.0],
                cells: [8, 12],
            },
            GridSpec::Disc {
                radius: 1.0,
                radial: 8,
                angular: 16,
            },
            GridSpec::Radial {
                r_in: 1.0,
                r_out: 3.0,
                cells: 30,
                dim: 3,
                mode: 0,
            },
        ] {
            let g = Grid::new(spec).unwrap();
            let one = GridFunction::constant(&g, 1.0);
            let u = neumann_heat(&g, &one, 0.7).unwrap();
            assert!(u.max_abs_diff(&one) < 1e-12, "{:?}", g.spec());
            let v = schrodinger_heat(&g, &one, &ScalarField::constant(0.3), 0.7).unwrap();
            assert!(v.values.iter().all(|x| (x - (-0.21f64).exp()).abs() < 1e-12));
        }
    }

    #[test]
    fn cosine_decays_at_unit_rate() {
        let mut errs = Vec::new();
        for cells in [32, 64] {
            let g = interval(cells);
            let u = neumann_heat(&g, &g.sample(&cos_x()), 0.5).unwrap();
            let exact = g.sample(&cos_x()).map(|c| (-0.5f64).exp() * c);
            errs.push(u.max_abs_diff(&exact));
        }
        assert!(errs[0] < 1e-3);
        assert!((errs[0] / errs[1]).log2() > 1.9);
    }

    #[test]
    fn long_time_limit_is_the_mean() {
        let g = Grid::new(GridSpec::Box {
            lo: [0.0, 0.0],
            hi: [1.0, 1.0],
            cells: [10, 10],
        })
        .unwrap();
        let f = g.sample(&ScalarField::Quadratic {
            center: Point::xy(0.2, 0.9),
            scale: 1.0,
        });
        let u = neumann_heat(&g, &f, 50.0).unwrap();
        let m = g.mean(&f);
        assert!(u.values.iter().all(|v| (v - m).abs() < 1e-8));
    }

    #[test]
    fn time_stepping_matches_spectral() {
        let g = interval(64);
        let f = g.sample(&cos_x());
        let u = richardson(&ShiftedOperator::plain(&g), &f.values, 0.4).unwrap();
        let v = neumann_heat(&g, &f, 0.4).unwrap();
        assert!(u.max_abs_diff_slice(&v.values) < 1e-9);

        let b = Grid::new(GridSpec::Box {
            lo: [0.0, 0.0],
            hi: [PI, 1.0],
            cells: [24, 8],
        })
        .unwrap();
        let op = ShiftedOperator {
            grid: &b,
            diag: vec![0.2; b.len()],
        };
        let fb = b.sample(&cos_x());
        let spectral = op.solve(0.05, &fb.values).unwrap();
        let cg = op.cg(0.05, &fb.values).unwrap();
        assert!(spectral.max_abs_diff_slice(&cg) < 1e-10);
    }

    #[test]
    fn disc_fft_and_cg_agree() {
        let g = Grid::new(GridSpec::Disc {
            radius: 1.0,
            radial: 10,
            angular: 16,
        })
        .unwrap();
        let f = g.sample(&ScalarField::Linear {
            slope: Point::xy(1.0, 0.5),
            offset: 0.0,
        });
        let fft = ShiftedOperator::plain(&g).solve(0.05, &f.values).unwrap();
        let cg = ShiftedOperator::plain(&g).cg(0.05, &f.values).unwrap();
        assert!(fft.max_abs_diff_slice(&cg) < 1e-10);
    }

    #[test]
    fn robin_interval_matches_eigenfunction() {
        // u = cos(ω(x − π/2)) satisfies u'(0) = β u(0) with β = ω tan(ωπ/2)
        let w: f64 = 0.8;
        let beta = w * (w * PI / 2.0).tan();
        let f = ScalarField::Axis {
            axis: 0,
            profile: Profile::Sin {
                amplitude: 1.0,
                frequency: w,
                phase: PI / 2.0 - w * PI / 2.0,
            },
        };
        let mut errs = Vec::new();
        for cells in [64, 128] {
            let g = interval(cells);
            let u = schrodinger_heat_with_boundary(
                &g,
                &g.sample(&f),
                &ScalarField::zero(),
                Some(&ScalarField::constant(beta)),
                0.5,
            )
            .unwrap();
            let exact = g.sample(&f).map(|v| v * (-w * w * 0.5).exp());
            errs.push(u.max_abs_diff(&exact));
        }
        assert!(errs[0] < 1e-3, "{errs:?}");
        assert!((errs[0] / errs[1]).log2() > 1.8, "{errs:?}");
    }

    #[test]
    fn gradient_examples() {
        let g = Grid::new(GridSpec::Box {
            lo: [0.0, 0.0],
            hi: [1.0, 1.0],
            cells: [5, 7],
        })
        .unwrap();
        let u = g.sample(&ScalarField::Linear {
            slope: Point::xy(3.0, -4.0),
            offset: 1.0,
        });
        let gn = gradient_norm(&g, &u).unwrap();
        assert!(gn.values.iter().all(|v| (v - 5.0).abs() < 1e-12));
        let c = gradient_norm(&g, &GridFunction::constant(&g, 2.0)).unwrap();
        assert!(c.values.iter().all(|&v| v == 0.0));

        let gi = interval(200);
        let gc = gradient_norm(&gi, &gi.sample(&cos_x())).unwrap();
        let e = gi
            .nodes()
            .iter()
            .zip(&gc.values)
            .map(|(p, v)| (p.coord(0).sin() - v).abs())
            .fold(0.0, f64::max);
        assert!(e < 1e-4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn semigroup_symmetry_and_positivity(seed in proptest::collection::vec(-1.0f64..1.0, 33), s in 0.01f64..0.5, t in 0.01f64..0.5) {
            let g = interval(32);
            let f = GridFunction::new(seed.clone());
            let h = GridFunction::new(seed.iter().rev().map(|v| v * v).collect());
            let a = neumann_heat(&g, &neumann_heat(&g, &f, s).unwrap(), t).unwrap();
            let b = neumann_heat(&g, &f, s + t).unwrap();
            prop_assert!(a.max_abs_diff(&b) < 1e-8);
            let l = g.inner(&neumann_heat(&g, &f, t).unwrap(), &h);
            let r = g.inner(&f, &neumann_heat(&g, &h, t).unwrap());
            prop_assert!((l - r).abs() < 1e-10);
            let pos = neumann_heat(&g, &h, t).unwrap();
            prop_assert!(pos.min() >= -1e-12);
            let mass = (g.integrate(&pos) - g.integrate(&h)).abs();
            prop_assert!(mass <= 1e-10 * g.integrate(&h).abs().max(1.0));
            let kappa = ScalarField::Axis { axis: 0, profile: Profile::Sin { amplitude: 0.5, frequency: 1.0, phase: 0.0 } };
            let sp = schrodinger_heat(&g, &h, &kappa, t).unwrap();
            prop_assert!(sp.min() >= -1e-12);
        }
    }
}
