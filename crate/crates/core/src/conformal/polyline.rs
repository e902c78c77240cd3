use std::io::Write;

use serde::{Deserialize, Serialize};

use super::ConformalError;
use crate::geometry::{Domain, Point, ScalarField};

/// Curve `γ: [0, 1] → ℝⁿ` through its vertices, parameter grid uniform.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point>", into = "Vec<Point>")]
pub struct Polyline {
    vertices: Vec<Point>,
}

impl Polyline {
    pub fn new(vertices: Vec<Point>) -> Result<Self, ConformalError> {
        if vertices.len() < 2 {
            return Err(ConformalError::InvalidParameter("a polyline needs at least two vertices".into()));
        }
        let dim = vertices[0].dim();
        if vertices.iter().any(|v| v.dim() != dim || !v.is_finite()) {
            return Err(ConformalError::InvalidParameter("vertices must be finite and of one dimension".into()));
        }
        if vertices.windows(2).any(|w| w[0] == w[1]) {
            return Err(ConformalError::InvalidParameter("consecutive vertices must be distinct".into()));
        }
        Ok(Polyline { vertices })
    }

    /// `segments + 1` equally spaced vertices on the chord from `x` to `y`.
    pub fn segment(x: &Point, y: &Point, segments: usize) -> Result<Self, ConformalError> {
        let n = segments.max(1);
        Polyline::new((0..=n).map(|i| if i == n { *y } else { x.lerp(y, i as f64 / n as f64) }).collect())
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn segments(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].dim()
    }

    pub fn start(&self) -> Point {
        self.vertices[0]
    }

    pub fn end(&self) -> Point {
        self.vertices[self.vertices.len() - 1]
    }

    pub fn euclidean_length(&self) -> f64 {
        self.vertices.windows(2).map(|w| w[0].distance(&w[1])).sum()
    }

    /// Vertex list with columns `s, x1..xn, V, psi`, `s` the cumulative
    /// conformal length.
    pub fn write_csv<W: Write>(&self, domain: &Domain, psi: &ScalarField, mut out: W) -> Result<(), ConformalError> {
        let xs: Vec<String> = (1..=self.dim()).map(|i| format!("x{i}")).collect();
        writeln!(out, "s,{},V,psi", xs.join(","))?;
        let mut s = 0.0;
        for (i, v) in self.vertices.iter().enumerate() {
            if i > 0 {
                let u = &self.vertices[i - 1];
                s += (0.5 * (psi.value(u) + psi.value(v))).exp() * u.distance(v);
            }
            let coords: Vec<String> = v.coords().iter().map(|c| format!("{c:.12e}")).collect();
            writeln!(
                out,
                "{s:.12e},{},{:.12e},{:.12e}",
                coords.join(","),
                domain.signed_distance(v),
                psi.value(v)
            )?;
        }
        Ok(())
    }
}

impl TryFrom<Vec<Point>> for Polyline {
    type Error = ConformalError;

    fn try_from(v: Vec<Point>) -> Result<Self, Self::Error> {
        Polyline::new(v)
    }
}

impl From<Polyline> for Vec<Point> {
    fn from(p: Polyline) -> Self {
        p.vertices
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_rules() {
        assert!(Polyline::new(vec![Point::xy(0.0, 0.0)]).is_err());
        assert!(Polyline::new(vec![Point::xy(0.0, 0.0), Point::xy(0.0, 0.0)]).is_err());
        let p = Polyline::segment(&Point::xy(0.0, 0.0), &Point::xy(3.0, 4.0), 10).unwrap();
        assert_eq!(p.vertices().len(), 11);
        assert!((p.euclidean_length() - 5.0).abs() < 1e-14);
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<Polyline>(&json).unwrap(), p);
    }
}
