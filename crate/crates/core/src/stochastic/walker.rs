use rand::Rng;
use rand_distr::StandardNormal;

use crate::geometry::{Domain, GeometryError, Point, Vector};

/// One projected Euler step.
#[derive(Clone, Copy, Debug)]
pub struct StepRecord {
    /// Step number, starting at 0.
    pub index: usize,
    /// Path time at the start of the step.
    pub t: f64,
    /// Pre-step (reflected) position.
    pub from: Point,
    /// Brownian increment `√h ξ`.
    pub dw: Vector,
    /// Projection distance `V(from + dw)⁺`.
    pub push: f64,
    /// Inward normal at the projected point when `push > 0`.
    pub normal: Option<Vector>,
    /// Post-step position, in the domain.
    pub to: Point,
}

/// Streaming consumer of path steps, for functionals that need no path storage.
pub trait PathObserver {
    fn observe(&mut self, step: &StepRecord) -> Result<(), GeometryError>;
}

impl<F: FnMut(&StepRecord) -> Result<(), GeometryError>> PathObserver for F {
    fn observe(&mut self, step: &StepRecord) -> Result<(), GeometryError> {
        self(step)
    }
}

/// Projected Euler scheme `x ← Π_Y(x + √h ξ)` for Brownian motion with
/// generator ½Δ.
#[derive(Clone, Copy, Debug)]
pub struct Walker<'a> {
    domain: &'a Domain,
    h: f64,
    sqrt_h: f64,
}

impl<'a> Walker<'a> {
    pub fn new(domain: &'a Domain, h: f64) -> Self {
        Walker {
            domain,
            h,
            sqrt_h: h.sqrt(),
        }
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn domain(&self) -> &Domain {
        self.domain
    }

    /// Draws `√h ξ`; `sign = −1` gives the antithetic increment.
    #[inline]
    pub fn increment<R: Rng>(&self, dim: usize, rng: &mut R, sign: f64) -> Vector {
        let mut dw = Point::origin(dim);
        for i in 0..dim {
            let z: f64 = rng.sample(StandardNormal);
            dw.set_coord(i, sign * self.sqrt_h * z);
        }
        dw
    }

    #[inline]
    pub fn step_with(&self, index: usize, x: &Point, dw: Vector) -> Result<StepRecord, GeometryError> {
        let r = self.domain.reflect_into(&(*x + dw))?;
        Ok(StepRecord {
            index,
            t: index as f64 * self.h,
            from: *x,
            dw,
            push: r.push,
            normal: r.normal,
            to: r.point,
        })
    }
}

/// Runs `steps` steps from `x0`, feeding each to the observer; returns the
/// final position. Fails when a projection hits a singular point.
pub fn run_path<R: Rng, O: PathObserver + ?Sized>(
    walker: &Walker<'_>,
    x0: &Point,
    steps: usize,
    rng: &mut R,
    sign: f64,
    observer: &mut O,
) -> Result<Point, GeometryError> {
    let dim = x0.dim();
    let mut x = *x0;
    for i in 0..steps {
        let dw = walker.increment(dim, rng, sign);
        let rec = walker.step_with(i, &x, dw)?;
        observer.observe(&rec)?;
        x = rec.to;
    }
    Ok(x)
}

/// Evaluates `f` on path indices `0..n` (in parallel when enabled) and returns
/// the results in index order.
pub fn map_paths<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n as u64).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n as u64).map(f).collect()
    }
}

/// Stream index and increment sign of path `i` (antithetic pairs share a stream).
pub(crate) fn path_stream(i: u64, antithetic: bool) -> (u64, f64) {
    if antithetic {
        (i / 2, if i % 2 == 0 { 1.0 } else { -1.0 })
    } else {
        (i, 1.0)
    }
}
