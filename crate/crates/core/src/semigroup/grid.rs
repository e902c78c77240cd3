use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::SemigroupError;
use crate::geometry::{Point, ScalarField};

/// Shape of a structured grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GridSpec {
    /// Vertex grid on `[a, b]` with `cells` intervals.
    Interval { a: f64, b: f64, cells: usize },
    /// Vertex tensor grid on `[lo₀, hi₀] × [lo₁, hi₁]`.
    Box {
        lo: [f64; 2],
        hi: [f64; 2],
        cells: [usize; 2],
    },
    /// Polar tensor grid on the disc of the given radius: cell-centred in ρ,
    /// periodic in θ.
    Disc {
        radius: f64,
        radial: usize,
        angular: usize,
    },
    /// Angular mode `m` of an `dim`-dimensional rotationally symmetric problem on
    /// the shell `r_in ≤ |x| ≤ r_out` (`r_in = 0` for a ball); cell-centred.
    Radial {
        r_in: f64,
        r_out: f64,
        cells: usize,
        dim: usize,
        #[serde(default)]
        mode: u32,
    },
}

/// Compressed sparse rows.
#[derive(Clone, Debug, Default)]
pub(crate) struct Csr {
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    fn with_rows(n: usize) -> Self {
        Csr {
            row_ptr: Vec::with_capacity(n + 1),
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    fn push_row(&mut self, entries: &[(usize, f64)]) {
        if self.row_ptr.is_empty() {
            self.row_ptr.push(0);
        }
        for &(c, v) in entries {
            self.cols.push(c);
            self.vals.push(v);
        }
        self.row_ptr.push(self.cols.len());
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).map(|(c, v)| v * x[c]).sum();
        }
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == i).map_or(0.0, |(_, v)| v)
    }
}

/// A structured grid with quadrature weights and the Neumann Laplacian.
///
/// Node ordering: row-major `(i, j)` with the first axis slowest (for discs, the
/// radial index is the first axis).
#[derive(Clone, Debug)]
pub struct Grid {
    spec: GridSpec,
    nodes: Vec<Point>,
    weights: Vec<f64>,
    boundary: Vec<f64>,
    pub(crate) lap: Csr,
}

/// Values of a function at the nodes of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Self {
        GridFunction { values }
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        GridFunction {
            values: vec![c; grid.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs_diff(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction {
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Self, SemigroupError> {
        let bad = |m: String| Err(SemigroupError::Grid(m));
        match &spec {
            GridSpec::Interval { a, b, cells } => {
                if !(a < b) || *cells < 2 {
                    return bad(format!("interval grid needs a < b and ≥ 2 cells, got [{a}, {b}] / {cells}"));
                }
                Ok(Self::interval(spec.clone(), *a, *b, *cells))
            }
            GridSpec::Box { lo, hi, cells } => {
                if !(lo[0] < hi[0] && lo[1] < hi[1]) || cells[0] < 2 || cells[1] < 2 {
                    return bad("box grid needs lo < hi and ≥ 2 cells per axis".into());
                }
                Ok(Self::cuboid(spec.clone(), *lo, *hi, *cells))
            }
            GridSpec::Disc {
                radius,
                radial,
                angular,
            } => {
                if !(*radius > 0.0) || *radial < 2 || *angular < 4 {
                    return bad("disc grid needs radius > 0, ≥ 2 radial and ≥ 4 angular cells".into());
                }
                Ok(Self::disc(spec.clone(), *radius, *radial, *angular))
            }
            GridSpec::Radial {
                r_in,
                r_out,
                cells,
                dim,
                mode,
            } => {
                if !(*r_in >= 0.0 && r_in < r_out) || *cells < 2 || !(2..=3).contains(dim) {
                    return bad("radial grid needs 0 ≤ r_in < r_out, ≥ 2 cells and dimension 2 or 3".into());
                }
                if *r_in == 0.0 && *mode > 0 && *dim < 2 {
                    return bad("angular modes need dimension ≥ 2".into());
                }
                Ok(Self::radial(spec.clone(), *r_in, *r_out, *cells, *dim, *mode))
            }
        }
    }

    fn interval(spec: GridSpec, a: f64, b: f64, n: usize) -> Self {
        let h = (b - a) / n as f64;
        let nodes = (0..=n).map(|i| Point::x(a + i as f64 * h)).collect();
        let mut weights = vec![h; n + 1];
        weights[0] = h / 2.0;
        weights[n] = h / 2.0;
        let mut boundary = vec![0.0; n + 1];
        boundary[0] = 1.0;
        boundary[n] = 1.0;
        let mut lap = Csr::with_rows(n + 1);
        for row in neumann_1d_rows(n, h) {
            lap.push_row(&row);
        }
        Grid {
            spec,
            nodes,
            weights,
            boundary,
            lap,
        }
    }

    fn cuboid(spec: GridSpec, lo: [f64; 2], hi: [f64; 2], cells: [usize; 2]) -> Self {
        let [nx, ny] = cells;
        let hx = (hi[0] - lo[0]) / nx as f64;
        let hy = (hi[1] - lo[1]) / ny as f64;
        let (mx, my) = (nx + 1, ny + 1);
        let rx = neumann_1d_rows(nx, hx);
        let ry = neumann_1d_rows(ny, hy);
        let tw = |i: usize, n: usize, h: f64| if i == 0 || i == n { h / 2.0 } else { h };
        let mut nodes = Vec::with_capacity(mx * my);
        let mut weights = Vec::with_capacity(mx * my);
        let mut boundary = Vec::with_capacity(mx * my);
        let mut lap = Csr::with_rows(mx * my);
        for i in 0..mx {
            for j in 0..my {
                nodes.push(Point::xy(lo[0] + i as f64 * hx, lo[1] + j as f64 * hy));
                weights.push(tw(i, nx, hx) * tw(j, ny, hy));
                let mut b = 0.0;
                if i == 0 || i == nx {
                    b += tw(j, ny, hy);
                }
                if j == 0 || j == ny {
                    b += tw(i, nx, hx);
                }
                boundary.push(b);
                let mut row: Vec<(usize, f64)> = Vec::with_capacity(5);
                let mut diag = 0.0;
                for &(c, v) in &rx[i] {
                    if c == i {
                        diag += v;
                    } else {
                        row.push((c * my + j, v));
                    }
                }
                for &(c, v) in &ry[j] {
                    if c == j {
                        diag += v;
                    } else {
                        row.push((i * my + c, v));
                    }
                }
                row.push((i * my + j, diag));
                row.sort_by_key(|e| e.0);
                lap.push_row(&row);
            }
        }
        Grid {
            spec,
            nodes,
            weights,
            boundary,
            lap,
        }
    }

    fn disc(spec: GridSpec, radius: f64, nr: usize, nt: usize) -> Self {
        let dr = radius / nr as f64;
        let dt = 2.0 * PI / nt as f64;
        let mut nodes = Vec::with_capacity(nr * nt);
        let mut weights = Vec::with_capacity(nr * nt);
        let mut boundary = vec![0.0; nr * nt];
        let mut lap = Csr::with_rows(nr * nt);
        for i in 0..nr {
            let rho = (i as f64 + 0.5) * dr;
            let (inner, outer) = radial_face_coefficients(i, nr, 0.0, dr, 2);
            let ang = 1.0 / (rho * rho * dt * dt);
            for j in 0..nt {
                let th = j as f64 * dt;
                nodes.push(Point::xy(rho * th.cos(), rho * th.sin()));
                weights.push(rho * dr * dt);
                if i == nr - 1 {
                    boundary[i * nt + j] = radius * dt;
                }
                let idx = |ii: usize, jj: usize| ii * nt + jj;
                let mut row = Vec::with_capacity(5);
                if i > 0 {
                    row.push((idx(i - 1, j), inner));
                }
                row.push((idx(i, (j + nt - 1) % nt), ang));
                row.push((idx(i, j), -(inner + outer + 2.0 * ang)));
                row.push((idx(i, (j + 1) % nt), ang));
                if i + 1 < nr {
                    row.push((idx(i + 1, j), outer));
                }
                row.sort_by_key(|e| e.0);
                lap.push_row(&row);
            }
        }
        Grid {
            spec,
            nodes,
            weights,
            boundary,
            lap,
        }
    }

    fn radial(spec: GridSpec, r_in: f64, r_out: f64, n: usize, dim: usize, mode: u32) -> Self {
        let dr = (r_out - r_in) / n as f64;
        let sphere = if dim == 2 { 2.0 * PI } else { 4.0 * PI };
        let centrifugal = (mode * (mode + dim as u32 - 2)) as f64;
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let mut boundary = vec![0.0; n];
        let mut lap = Csr::with_rows(n);
        for i in 0..n {
            let rho = r_in + (i as f64 + 0.5) * dr;
            let mut p = Point::origin(dim);
            p.set_coord(0, rho);
            nodes.push(p);
            weights.push(sphere * rho.powi(dim as i32 - 1) * dr);
            let (inner, outer) = radial_face_coefficients(i, n, r_in, dr, dim);
            let mut row = Vec::with_capacity(3);
            if i > 0 {
                row.push((i - 1, inner));
            }
            row.push((i, -(inner + outer) - centrifugal / (rho * rho)));
            if i + 1 < n {
                row.push((i + 1, outer));
            }
            lap.push_row(&row);
        }
        if r_in > 0.0 {
            boundary[0] = sphere * r_in.powi(dim as i32 - 1);
        }
        boundary[n - 1] = sphere * r_out.powi(dim as i32 - 1);
        Grid {
            spec,
            nodes,
            weights,
            boundary,
            lap,
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    /// Quadrature weights (trapezoid on vertex grids, midpoint on cell grids).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Boundary-measure weight carried by each node (zero in the interior).
    pub fn boundary_weights(&self) -> &[f64] {
        &self.boundary
    }

    /// Spatial dimension of the node coordinates.
    pub fn dim(&self) -> usize {
        self.nodes[0].dim()
    }

    /// Smallest grid spacing; used to scale discretization allowances.
    pub fn spacing(&self) -> f64 {
        match &self.spec {
            GridSpec::Interval { a, b, cells } => (b - a) / *cells as f64,
            GridSpec::Box { lo, hi, cells } => {
                ((hi[0] - lo[0]) / cells[0] as f64).min((hi[1] - lo[1]) / cells[1] as f64)
            }
            GridSpec::Disc { radius, radial, .. } => radius / *radial as f64,
            GridSpec::Radial {
                r_in, r_out, cells, ..
            } => (r_out - r_in) / *cells as f64,
        }
    }

    pub fn sample(&self, f: &ScalarField) -> GridFunction {
        GridFunction {
            values: self.nodes.iter().map(|x| f.value(x)).collect(),
        }
    }

    pub fn integrate(&self, u: &GridFunction) -> f64 {
        self.weights.iter().zip(&u.values).map(|(w, v)| w * v).sum()
    }

    pub fn inner(&self, u: &GridFunction, v: &GridFunction) -> f64 {
        weighted_dot(&self.weights, &u.values, &v.values)
    }

    pub fn volume(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn mean(&self, u: &GridFunction) -> f64 {
        self.integrate(u) / self.volume()
    }

    /// Discrete Neumann Laplacian applied to `u`.
    pub fn laplacian(&self, u: &GridFunction) -> Result<GridFunction, SemigroupError> {
        self.check(u)?;
        let mut out = vec![0.0; self.len()];
        self.lap.apply(&u.values, &mut out);
        Ok(GridFunction { values: out })
    }

    pub(crate) fn check(&self, u: &GridFunction) -> Result<(), SemigroupError> {
        if u.len() != self.len() {
            return Err(SemigroupError::Length {
                expected: self.len(),
                got: u.len(),
            });
        }
        Ok(())
    }

    /// Value and derivative at abscissa `x` of a one-dimensional grid function
    /// (Interval or Radial) by local quadratic interpolation with Neumann ghosts.
    pub fn interpolate_1d(&self, u: &GridFunction, x: f64) -> Result<(f64, f64), SemigroupError> {
        self.check(u)?;
        let (x0, h, cell_centred) = match &self.spec {
            GridSpec::Interval { a, b, cells } => (*a, (b - a) / *cells as f64, false),
            GridSpec::Radial {
                r_in, r_out, cells, ..
            } => (*r_in, (r_out - r_in) / *cells as f64, true),
            _ => return Err(SemigroupError::Grid("interpolation needs a one-dimensional grid".into())),
        };
        let n = u.len() as isize;
        // ghost reflection: vertex grids mirror about the end node, cell grids about the face
        let at = |k: isize| -> f64 {
            let idx = if cell_centred {
                if k < 0 {
                    -k - 1
                } else if k >= n {
                    2 * n - 1 - k
                } else {
                    k
                }
            } else if k < 0 {
                -k
            } else if k >= n {
                2 * (n - 1) - k
            } else {
                k
            };
            u.values[idx.clamp(0, n - 1) as usize]
        };
        let s = (x - x0) / h - if cell_centred { 0.5 } else { 0.0 };
        let k = s.round() as isize;
        let d = s - k as f64;
        let (um, u0, up) = (at(k - 1), at(k), at(k + 1));
        let value = u0 + 0.5 * d * (up - um) + 0.5 * d * d * (up - 2.0 * u0 + um);
        let slope = (0.5 * (up - um) + d * (up - 2.0 * u0 + um)) / h;
        Ok((value, slope))
    }

    /// Writes `x1..xn,value` rows.
    pub fn write_csv<W: Write>(&self, u: &GridFunction, mut out: W) -> Result<(), SemigroupError> {
        self.check(u)?;
        let dim = self.dim();
        let header: Vec<String> = (1..=dim).map(|i| format!("x{i}")).chain(["value".into()]).collect();
        writeln!(out, "{}", header.join(","))?;
        for (p, v) in self.nodes.iter().zip(&u.values) {
            let cols: Vec<String> = p.coords().iter().chain([v]).map(|c| format!("{c:.12e}")).collect();
            writeln!(out, "{}", cols.join(","))?;
        }
        Ok(())
    }
}

pub(crate) fn weighted_dot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum()
}

/// Rows of the vertex-grid Neumann Laplacian with ghost reflection.
fn neumann_1d_rows(n: usize, h: f64) -> Vec<Vec<(usize, f64)>> {
    let c = 1.0 / (h * h);
    (0..=n)
        .map(|i| {
            if i == 0 {
                vec![(0, -2.0 * c), (1, 2.0 * c)]
            } else if i == n {
                vec![(n - 1, 2.0 * c), (n, -2.0 * c)]
            } else {
                vec![(i - 1, c), (i, -2.0 * c), (i + 1, c)]
            }
        })
        .collect()
}

/// Finite-volume flux coefficients of `ρ^{1−d} ∂ρ(ρ^{d−1} ∂ρ)` at cell `i`;
/// zero flux through the two outer faces.
fn radial_face_coefficients(i: usize, n: usize, r_in: f64, dr: f64, dim: usize) -> (f64, f64) {
    let p = dim as i32 - 1;
    let rho = r_in + (i as f64 + 0.5) * dr;
    let vol = rho.powi(p) * dr * dr;
    let inner = if i == 0 { 0.0 } else { (r_in + i as f64 * dr).powi(p) / vol };
    let outer = if i + 1 == n {
        0.0
    } else {
        (r_in + (i + 1) as f64 * dr).powi(p) / vol
    };
    (inner, outer)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grids() -> Vec<Grid> {
        [
            GridSpec::Interval {
                a: 0.0,
                b: PI,
                cells: 16,
            },
            GridSpec::Box {
                lo: [0.0, -1.0],
                hi: [1.0, 2.0],
                cells: [6, 9],
            },
            GridSpec::Disc {
                radius: 0.7,
                radial: 5,
                angular: 8,
            },
            GridSpec::Radial {
                r_in: 0.5,
                r_out: 2.0,
                cells: 12,
                dim: 3,
                mode: 0,
            },
        ]
        .into_iter()
        .map(|s| Grid::new(s).unwrap())
        .collect()
    }

    #[test]
    fn rows_sum_to_zero_and_operator_is_weighted_symmetric() {
        for g in grids() {
            for i in 0..g.len() {
                let s: f64 = g.lap.row(i).map(|(_, v)| v).sum();
                assert!(s.abs() < 1e-9 * g.lap.diag(i).abs(), "{:?} row {i}", g.spec());
                for (j, v) in g.lap.row(i) {
                    let back = g.lap.row(j).find(|&(c, _)| c == i).unwrap().1;
                    let (a, b) = (g.weights()[i] * v, g.weights()[j] * back);
                    assert!((a - b).abs() < 1e-10 * a.abs(), "{:?} ({i},{j})", g.spec());
                }
            }
        }
    }

    #[test]
    fn volumes() {
        let g = grids();
        assert!((g[0].volume() - PI).abs() < 1e-12);
        assert!((g[1].volume() - 3.0).abs() < 1e-12);
        assert!((g[2].volume() - PI * 0.49).abs() < 1e-12);
        let shell = 4.0 / 3.0 * PI * (8.0 - 0.125);
        assert!((g[3].volume() - shell).abs() < 1e-2 * shell);
    }

    #[test]
    fn interpolation_is_exact_for_quadratics() {
        let g = Grid::new(GridSpec::Interval {
            a: 0.0,
            b: 1.0,
            cells: 10,
        })
        .unwrap();
        let u = GridFunction::new(g.nodes().iter().map(|p| p.coord(0).powi(2) - p.coord(0)).collect());
        let (v, d) = g.interpolate_1d(&u, 0.337).unwrap();
        assert!((v - (0.337f64.powi(2) - 0.337)).abs() < 1e-14);
        assert!((d - (2.0 * 0.337 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn csv_layout() {
        let g = Grid::new(GridSpec::Interval {
            a: 0.0,
            b: 1.0,
            cells: 2,
        })
        .unwrap();
        let mut buf = Vec::new();
        g.write_csv(&GridFunction::constant(&g, 1.0), &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().count(), 4);
        assert!(s.starts_with("x1,value\n"));
    }
}
