use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use super::GeometryError;

/// Largest ambient dimension supported by the engine.
pub const MAX_DIM: usize = 3;

/// A point (or displacement vector) in ℝⁿ, n ∈ {1, 2, 3}.
///
/// Coordinates beyond `dim` are kept at zero so that arithmetic can run on the
/// full fixed-size array without branching on the dimension.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point {
    coords: [f64; MAX_DIM],
    dim: usize,
}

/// Displacements share the representation of points.
pub type Vector = Point;

impl Point {
    pub fn new(coords: &[f64]) -> Result<Self, GeometryError> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(GeometryError::Dimension(coords.len()));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::InvalidParameter(format!(
                "non-finite coordinate in {coords:?}"
            )));
        }
        let mut c = [0.0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Ok(Self {
            coords: c,
            dim: coords.len(),
        })
    }

    pub fn origin(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "dimension {dim} out of range");
        Self {
            coords: [0.0; MAX_DIM],
            dim,
        }
    }

    pub fn x(a: f64) -> Self {
        Self {
            coords: [a, 0.0, 0.0],
            dim: 1,
        }
    }

    pub fn xy(a: f64, b: f64) -> Self {
        Self {
            coords: [a, b, 0.0],
            dim: 2,
        }
    }

    pub fn xyz(a: f64, b: f64, c: f64) -> Self {
        Self {
            coords: [a, b, c],
            dim: 3,
        }
    }

    /// Unit vector along `axis`.
    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut p = Self::origin(dim);
        p.coords[axis] = 1.0;
        p
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    #[inline]
    pub fn coord(&self, axis: usize) -> f64 {
        self.coords[axis]
    }

    #[inline]
    pub fn set_coord(&mut self, axis: usize, value: f64) {
        debug_assert!(axis < self.dim);
        self.coords[axis] = value;
    }

    #[inline]
    pub fn dot(&self, other: &Point) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        self.coords[0] * other.coords[0]
            + self.coords[1] * other.coords[1]
            + self.coords[2] * other.coords[2]
    }

    #[inline]
    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    #[inline]
    pub fn distance(&self, other: &Point) -> f64 {
        (*self - *other).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.is_finite())
    }

    /// `self + t (other - self)`.
    #[inline]
    pub fn lerp(&self, other: &Point, t: f64) -> Point {
        *self + (*other - *self) * t
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = GeometryError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Point::new(&v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.coords().to_vec()
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.coords())
    }
}

impl Add for Point {
    type Output = Point;

    #[inline]
    fn add(self, rhs: Point) -> Point {
        debug_assert_eq!(self.dim, rhs.dim);
        Point {
            coords: [
                self.coords[0] + rhs.coords[0],
                self.coords[1] + rhs.coords[1],
                self.coords[2] + rhs.coords[2],
            ],
            dim: self.dim,
        }
    }
}

impl AddAssign for Point {
    #[inline]
    fn add_assign(&mut self, rhs: Point) {
        *self = *self + rhs;
    }
}

impl Sub for Point {
    type Output = Point;

    #[inline]
    fn sub(self, rhs: Point) -> Point {
        debug_assert_eq!(self.dim, rhs.dim);
        Point {
            coords: [
                self.coords[0] - rhs.coords[0],
                self.coords[1] - rhs.coords[1],
                self.coords[2] - rhs.coords[2],
            ],
            dim: self.dim,
        }
    }
}

impl Mul<f64> for Point {
    type Output = Point;

    #[inline]
    fn mul(self, s: f64) -> Point {
        Point {
            coords: [self.coords[0] * s, self.coords[1] * s, self.coords[2] * s],
            dim: self.dim,
        }
    }
}

impl Neg for Point {
    type Output = Point;

    #[inline]
    fn neg(self) -> Point {
        self * -1.0
    }
}
