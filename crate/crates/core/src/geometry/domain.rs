use serde::{Deserialize, Serialize};

use super::field::ScalarField;
use super::{GeometryError, Point, Vector};

/// Radii below this fraction of the domain radius are treated as the ball centre.
const CENTER_EPS: f64 = 1e-12;

/// Closed subsets Y ⊂ ℝⁿ with a closed-form signed distance
/// `V = d(·, Y) − d(·, ℝⁿ ∖ Y)` (negative inside, zero on ∂Y, positive outside).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Domain {
    Interval { a: f64, b: f64 },
    Box { lo: Point, hi: Point },
    Ball { center: Point, radius: f64 },
    BallComplement { center: Point, radius: f64 },
    /// `{ x : x[axis] ≥ level }`.
    HalfSpace { dim: usize, axis: usize, level: f64 },
}

/// Result of projecting a point onto the domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Reflection {
    pub point: Point,
    /// `V(x)⁺`, the distance travelled by the projection.
    pub push: f64,
    /// Inward unit normal at the projected point; `None` when no push happened.
    pub normal: Option<Vector>,
}

impl Domain {
    pub fn interval(a: f64, b: f64) -> Result<Self, GeometryError> {
        let d = Domain::Interval { a, b };
        d.validate()?;
        Ok(d)
    }

    pub fn cuboid(lo: Point, hi: Point) -> Result<Self, GeometryError> {
        let d = Domain::Box { lo, hi };
        d.validate()?;
        Ok(d)
    }

    pub fn ball(center: Point, radius: f64) -> Result<Self, GeometryError> {
        let d = Domain::Ball { center, radius };
        d.validate()?;
        Ok(d)
    }

    pub fn ball_complement(center: Point, radius: f64) -> Result<Self, GeometryError> {
        let d = Domain::BallComplement { center, radius };
        d.validate()?;
        Ok(d)
    }

    pub fn half_space(dim: usize, axis: usize, level: f64) -> Result<Self, GeometryError> {
        let d = Domain::HalfSpace { dim, axis, level };
        d.validate()?;
        Ok(d)
    }

    /// Checks the parameter invariants; deserialized domains must pass this
    /// before use.
    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |m: String| Err(GeometryError::InvalidParameter(m));
        match self {
            Domain::Interval { a, b } => {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    return bad(format!("interval needs a < b, got [{a}, {b}]"));
                }
            }
            Domain::Box { lo, hi } => {
                if lo.dim() != hi.dim() {
                    return bad("box corners differ in dimension".into());
                }
                if lo.coords().iter().zip(hi.coords()).any(|(l, h)| l >= h) {
                    return bad(format!("box needs lo < hi on every axis, got {lo:?} {hi:?}"));
                }
            }
            Domain::Ball { radius, .. } | Domain::BallComplement { radius, .. } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return bad(format!("radius must be positive, got {radius}"));
                }
            }
            Domain::HalfSpace { dim, axis, level } => {
                if !(1..=super::MAX_DIM).contains(dim) {
                    return Err(GeometryError::Dimension(*dim));
                }
                if axis >= dim {
                    return bad(format!("axis {axis} out of range for dimension {dim}"));
                }
                if !level.is_finite() {
                    return bad("half-space level must be finite".into());
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Box { lo, .. } => lo.dim(),
            Domain::Ball { center, .. } | Domain::BallComplement { center, .. } => center.dim(),
            Domain::HalfSpace { dim, .. } => *dim,
        }
    }

    pub fn contains(&self, x: &Point) -> bool {
        self.signed_distance(x) <= 0.0
    }

    /// `V(x)`; defined everywhere.
    pub fn signed_distance(&self, x: &Point) -> f64 {
        match self {
            Domain::Interval { a, b } => box_signed_distance(&[*a], &[*b], x.coords()),
            Domain::Box { lo, hi } => box_signed_distance(lo.coords(), hi.coords(), x.coords()),
            Domain::Ball { center, radius } => x.distance(center) - radius,
            Domain::BallComplement { center, radius } => radius - x.distance(center),
            Domain::HalfSpace { axis, level, .. } => level - x.coord(*axis),
        }
    }

    /// `∇V(x)`; a hard error at the declared singular set (ball centres).
    pub fn signed_distance_gradient(&self, x: &Point) -> Result<Vector, GeometryError> {
        match self {
            Domain::Interval { a, b } => Ok(box_gradient(&[*a], &[*b], x)),
            Domain::Box { lo, hi } => Ok(box_gradient(lo.coords(), hi.coords(), x)),
            Domain::Ball { center, radius } => {
                let (u, _) = radial_unit(center, *radius, x)?;
                Ok(u)
            }
            Domain::BallComplement { center, radius } => {
                let (u, _) = radial_unit(center, *radius, x)?;
                Ok(-u)
            }
            Domain::HalfSpace { dim, axis, .. } => Ok(-Point::unit(*dim, *axis)),
        }
    }

    /// `ΔV(x)`; for boxes this is the a.e. value off the medial skeleton.
    pub fn signed_distance_laplacian(&self, x: &Point) -> Result<f64, GeometryError> {
        match self {
            Domain::Interval { a, b } => Ok(box_laplacian(&[*a], &[*b], x.coords())),
            Domain::Box { lo, hi } => Ok(box_laplacian(lo.coords(), hi.coords(), x.coords())),
            Domain::Ball { center, radius } => {
                let (_, rho) = radial_unit(center, *radius, x)?;
                Ok((x.dim() as f64 - 1.0) / rho)
            }
            Domain::BallComplement { center, radius } => {
                let (_, rho) = radial_unit(center, *radius, x)?;
                Ok(-(x.dim() as f64 - 1.0) / rho)
            }
            Domain::HalfSpace { .. } => Ok(0.0),
        }
    }

    /// Nearest-point projection onto Y (the Skorokhod step of the simulator).
    pub fn reflect_into(&self, x: &Point) -> Result<Reflection, GeometryError> {
        let v = self.signed_distance(x);
        if v <= 0.0 {
            return Ok(Reflection {
                point: *x,
                push: 0.0,
                normal: None,
            });
        }
        let point = match self {
            Domain::Interval { a, b } => Point::x(x.coord(0).clamp(*a, *b)),
            Domain::Box { lo, hi } => {
                let mut p = *x;
                for i in 0..x.dim() {
                    p.set_coord(i, x.coord(i).clamp(lo.coord(i), hi.coord(i)));
                }
                p
            }
            Domain::Ball { center, radius } | Domain::BallComplement { center, radius } => {
                let (u, _) = radial_unit(center, *radius, x)?;
                // rounding may leave the projection a hair outside; pull it in
                let inward = if matches!(self, Domain::Ball { .. }) { -1.0 } else { 1.0 };
                let mut p = *center + u * *radius;
                let mut k = 1.0;
                while self.signed_distance(&p) > 0.0 {
                    p = *center + u * (*radius * (1.0 + inward * k * f64::EPSILON));
                    k *= 2.0;
                }
                p
            }
            Domain::HalfSpace { axis, level, .. } => {
                let mut p = *x;
                p.set_coord(*axis, *level);
                p
            }
        };
        let d = point - *x;
        let push = d.norm();
        Ok(Reflection {
            point,
            push,
            normal: Some(d * (1.0 / push)),
        })
    }

    /// Constant lower bound ℓ for the curvature of ∂Y when the ambient space is
    /// the simply connected model space of curvature `base_curvature`:
    /// `cot_K(r)` for balls, `−cot_K(r)` for ball complements, 0 for flat faces.
    pub fn boundary_curvature_bound(&self, base_curvature: f64) -> Result<ScalarField, GeometryError> {
        let value = match self {
            Domain::Ball { radius, .. } => cot_k(base_curvature, *radius)?,
            Domain::BallComplement { radius, .. } => -cot_k(base_curvature, *radius)?,
            Domain::Interval { .. } | Domain::Box { .. } | Domain::HalfSpace { .. } => {
                if base_curvature != 0.0 {
                    return Err(GeometryError::UnsupportedGeometry(
                        "flat faces only have a curvature bound in a flat base space".into(),
                    ));
                }
                0.0
            }
        };
        Ok(ScalarField::Constant { value })
    }

    /// Domain radius (balls) or a characteristic length used for default tolerances.
    pub fn length_scale(&self) -> f64 {
        match self {
            Domain::Interval { a, b } => b - a,
            Domain::Box { lo, hi } => (*hi - *lo).coords().iter().cloned().fold(f64::INFINITY, f64::min),
            Domain::Ball { radius, .. } | Domain::BallComplement { radius, .. } => *radius,
            Domain::HalfSpace { .. } => 1.0,
        }
    }
}

/// Comparison cotangent: `1/r` for K = 0, `√K cot(√K r)` for K > 0 and
/// `√−K coth(√−K r)` for K < 0. For K > 0 the radius must lie in `(0, π/(2√K))`.
pub fn cot_k(k: f64, r: f64) -> Result<f64, GeometryError> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(GeometryError::InvalidParameter(format!("radius must be positive, got {r}")));
    }
    if k == 0.0 {
        Ok(1.0 / r)
    } else if k > 0.0 {
        let s = k.sqrt();
        if s * r >= std::f64::consts::FRAC_PI_2 {
            return Err(GeometryError::UnsupportedGeometry(format!(
                "radius {r} exceeds the comparison range π/(2√K) for K = {k}"
            )));
        }
        Ok(s / (s * r).tan())
    } else {
        let s = (-k).sqrt();
        Ok(s / (s * r).tanh())
    }
}

/// `V_{r,z}(x)` for the sphere comparison argument: zero on `∂B_r(z)`,
/// positive inside the ball, negative outside.
pub fn comparison_potential(r: f64, z: &Point, k: f64, x: &Point) -> Result<f64, GeometryError> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(GeometryError::InvalidParameter(format!("radius must be positive, got {r}")));
    }
    Ok(comparison_profile(r, k, x.distance(z)).0)
}

/// `(F, F', F'')` of the comparison potential as a function of the distance `d`.
pub(crate) fn comparison_profile(r: f64, k: f64, d: f64) -> (f64, f64, f64) {
    if k == 0.0 {
        ((r * r - d * d) / (2.0 * r), -d / r, -1.0 / r)
    } else if k > 0.0 {
        let s = k.sqrt();
        let den = s * (s * r).sin();
        (
            ((s * d).cos() - (s * r).cos()) / den,
            -(s * d).sin() / (s * r).sin(),
            -s * (s * d).cos() / (s * r).sin(),
        )
    } else {
        let s = (-k).sqrt();
        let den = s * (s * r).sinh();
        (
            ((s * r).cosh() - (s * d).cosh()) / den,
            -(s * d).sinh() / (s * r).sinh(),
            -s * (s * d).cosh() / (s * r).sinh(),
        )
    }
}

fn radial_unit(center: &Point, radius: f64, x: &Point) -> Result<(Vector, f64), GeometryError> {
    let d = *x - *center;
    let rho = d.norm();
    if rho <= CENTER_EPS * radius {
        return Err(GeometryError::Singular {
            what: "signed distance of a ball",
            at: *x,
        });
    }
    Ok((d * (1.0 / rho), rho))
}

fn box_signed_distance(lo: &[f64], hi: &[f64], x: &[f64]) -> f64 {
    let mut outside = 0.0;
    let mut inside = f64::INFINITY;
    let mut is_outside = false;
    for ((&l, &h), &c) in lo.iter().zip(hi).zip(x) {
        let e = (l - c).max(c - h);
        if e > 0.0 {
            is_outside = true;
            outside += e * e;
        }
        inside = inside.min((c - l).min(h - c));
    }
    if is_outside {
        outside.sqrt()
    } else {
        -inside
    }
}

fn box_gradient(lo: &[f64], hi: &[f64], x: &Point) -> Vector {
    let dim = x.dim();
    let v = box_signed_distance(lo, hi, x.coords());
    let mut g = Point::origin(dim);
    if v > 0.0 {
        for i in 0..dim {
            let c = x.coord(i);
            let e = if c < lo[i] {
                c - lo[i]
            } else if c > hi[i] {
                c - hi[i]
            } else {
                0.0
            };
            g.set_coord(i, e / v);
        }
    } else {
        // nearest face wins; ties on the skeleton resolve to the first axis
        let mut best = (f64::INFINITY, 0usize, 0.0);
        for i in 0..dim {
            let c = x.coord(i);
            if c - lo[i] < best.0 {
                best = (c - lo[i], i, -1.0);
            }
            if hi[i] - c < best.0 {
                best = (hi[i] - c, i, 1.0);
            }
        }
        g.set_coord(best.1, best.2);
    }
    g
}

fn box_laplacian(lo: &[f64], hi: &[f64], x: &[f64]) -> f64 {
    let v = box_signed_distance(lo, hi, x);
    if v <= 0.0 {
        return 0.0;
    }
    // outside, V is the distance to a face, edge or corner of codimension k
    let k = lo
        .iter()
        .zip(hi)
        .zip(x)
        .filter(|((l, h), c)| *c < *l || *c > *h)
        .count();
    (k as f64 - 1.0) / v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_disc() -> Domain {
        Domain::ball(Point::xy(0.0, 0.0), 1.0).unwrap()
    }

    #[test]
    fn signed_distance_examples() {
        let b = unit_disc();
        assert_eq!(b.signed_distance(&Point::xy(0.0, 0.0)), -1.0);
        assert_eq!(b.signed_distance(&Point::xy(2.0, 0.0)), 1.0);
        let h = Domain::half_space(2, 0, 0.0).unwrap();
        assert_eq!(h.signed_distance(&Point::xy(0.3, 5.0)), -0.3);
    }

    #[test]
    fn derivative_at_center_is_an_error() {
        let b = unit_disc();
        assert!(matches!(
            b.signed_distance_gradient(&Point::xy(0.0, 0.0)),
            Err(GeometryError::Singular { .. })
        ));
        assert!(b.signed_distance_laplacian(&Point::xy(0.0, 0.0)).is_err());
        let c = Domain::ball_complement(Point::xy(0.0, 0.0), 1.0).unwrap();
        assert!(c.reflect_into(&Point::xy(0.0, 0.0)).is_err());
    }

    #[test]
    fn reflection_examples() {
        let b = unit_disc();
        let r = b.reflect_into(&Point::xy(1.2, 0.0)).unwrap();
        assert!((r.point.distance(&Point::xy(1.0, 0.0))) < 1e-15);
        assert!((r.push - 0.2).abs() < 1e-15);
        assert!(r.normal.unwrap().distance(&Point::xy(-1.0, 0.0)) < 1e-15);

        let r = b.reflect_into(&Point::xy(0.5, 0.0)).unwrap();
        assert_eq!(r.point, Point::xy(0.5, 0.0));
        assert_eq!(r.push, 0.0);
        assert!(r.normal.is_none());

        let h = Domain::half_space(2, 0, 0.0).unwrap();
        let r = h.reflect_into(&Point::xy(-0.1, 3.0)).unwrap();
        assert_eq!(r.point, Point::xy(0.0, 3.0));
        assert!((r.push - 0.1).abs() < 1e-15);
        assert_eq!(r.normal.unwrap(), Point::xy(1.0, 0.0));
    }

    #[test]
    fn box_distance_and_reflection() {
        let bx = Domain::cuboid(Point::xy(0.0, 0.0), Point::xy(2.0, 1.0)).unwrap();
        assert!((bx.signed_distance(&Point::xy(1.0, 0.4)) + 0.4).abs() < 1e-15);
        assert!((bx.signed_distance(&Point::xy(3.0, 2.0)) - 2f64.sqrt()).abs() < 1e-15);
        let r = bx.reflect_into(&Point::xy(3.0, 2.0)).unwrap();
        assert_eq!(r.point, Point::xy(2.0, 1.0));
        assert!((bx.signed_distance_laplacian(&Point::xy(3.0, 2.0)).unwrap() - 1.0 / 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn curvature_bounds() {
        let b = Domain::ball(Point::xy(0.0, 0.0), 0.5).unwrap();
        let c = Domain::ball_complement(Point::xy(0.0, 0.0), 0.5).unwrap();
        let h = Domain::half_space(2, 1, 0.0).unwrap();
        let p = Point::xy(0.1, 0.2);
        assert!((b.boundary_curvature_bound(0.0).unwrap().value(&p) - 2.0).abs() < 1e-15);
        assert!((c.boundary_curvature_bound(0.0).unwrap().value(&p) + 2.0).abs() < 1e-15);
        assert_eq!(h.boundary_curvature_bound(0.0).unwrap().value(&p), 0.0);
        // spherical comparison: cot(r) for the ball, beyond π/2 unsupported
        let cot = b.boundary_curvature_bound(1.0).unwrap().value(&p);
        assert!((cot - 1.0 / 0.5f64.tan()).abs() < 1e-14);
        let big = Domain::ball(Point::xy(0.0, 0.0), 2.0).unwrap();
        assert!(matches!(
            big.boundary_curvature_bound(1.0),
            Err(GeometryError::UnsupportedGeometry(_))
        ));
        assert!(h.boundary_curvature_bound(-1.0).is_err());
    }

    #[test]
    fn comparison_potential_examples() {
        let z = Point::xy(0.0, 0.0);
        assert!((comparison_potential(1.0, &z, 0.0, &z).unwrap() - 0.5).abs() < 1e-15);
        assert!(comparison_potential(1.0, &z, 0.0, &Point::xy(0.6, 0.8)).unwrap().abs() < 1e-15);
        let r = std::f64::consts::FRAC_PI_4;
        let v = comparison_potential(r, &z, 1.0, &z).unwrap();
        assert!((v - 0.41421356237309503).abs() < 1e-12);
        // negative curvature branch vanishes on the sphere and is positive inside
        assert!(comparison_potential(1.0, &z, -1.0, &Point::xy(1.0, 0.0)).unwrap().abs() < 1e-15);
        assert!(comparison_potential(1.0, &z, -1.0, &z).unwrap() > 0.0);
        assert!(comparison_potential(0.0, &z, 0.0, &z).is_err());
    }

    #[test]
    fn serde_rejects_unknown_keys() {
        let ok: Domain = serde_json::from_str(r#"{"kind":"ball","center":[0,0],"radius":0.5}"#).unwrap();
        assert_eq!(ok, Domain::ball(Point::xy(0.0, 0.0), 0.5).unwrap());
        assert!(serde_json::from_str::<Domain>(r#"{"kind":"ball","center":[0,0],"radius":0.5,"r":1}"#).is_err());
    }
}
