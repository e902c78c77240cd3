use serde::{Deserialize, Serialize};

use super::domain::comparison_profile;
use super::{Domain, GeometryError, Point, Profile, Vector};

const CENTER_EPS: f64 = 1e-12;

/// Analytic scalar field on ℝⁿ with closed-form gradient and Laplacian.
///
/// Evaluation never fails; derivative queries at a declared singular point
/// (the centre of a radial field with a kink, the centre of a ball distance)
/// return [`GeometryError::Singular`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScalarField {
    Constant {
        value: f64,
    },
    /// `a·x + b`.
    Linear {
        slope: Vector,
        #[serde(default)]
        offset: f64,
    },
    /// `½ s |x − c|²`.
    Quadratic {
        center: Point,
        #[serde(default = "one")]
        scale: f64,
    },
    /// `g(x[axis])`.
    Axis { axis: usize, profile: Profile },
    /// `g(|x − c|)`.
    Radial { center: Point, profile: Profile },
    /// `−log(|x − c| / r)`; the weight making `∂B_r(c)` totally geodesic.
    LogRadial { center: Point, radius: f64 },
    /// Signed distance `V` of a domain.
    SignedDistance { domain: Domain },
    /// `V_{r,z}` of the sphere comparison argument in curvature `K`.
    ComparisonPotential {
        radius: f64,
        center: Point,
        #[serde(default)]
        curvature: f64,
    },
    /// Neumann-harmonic dipole `x₁(1 + c|x − z|⁻ⁿ)`, `c = rⁿ/(n − 1)`, outside `B_r(z)`.
    Dipole { center: Point, radius: f64 },
    /// `(ε − ℓ)·V`.
    ConvexificationWeight {
        domain: Domain,
        ell: Box<ScalarField>,
        eps: f64,
    },
    Scaled {
        factor: f64,
        field: Box<ScalarField>,
    },
    Sum {
        terms: Vec<ScalarField>,
    },
    Product {
        factors: Vec<ScalarField>,
    },
    /// `e^g`.
    Exp {
        field: Box<ScalarField>,
    },
}

fn one() -> f64 {
    1.0
}

/// Value, gradient and Laplacian at one point.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Jet {
    pub value: f64,
    pub grad: Vector,
    pub lap: f64,
}

impl ScalarField {
    pub fn constant(value: f64) -> Self {
        ScalarField::Constant { value }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn scaled(self, factor: f64) -> Self {
        ScalarField::Scaled {
            factor,
            field: Box::new(self),
        }
    }

    pub fn plus(self, other: ScalarField) -> Self {
        ScalarField::Sum {
            terms: vec![self, other],
        }
    }

    pub fn times(self, other: ScalarField) -> Self {
        ScalarField::Product {
            factors: vec![self, other],
        }
    }

    /// Returns `Some(c)` when the field is a constant (after trivial folding).
    pub fn as_constant(&self) -> Option<f64> {
        match self {
            ScalarField::Constant { value } => Some(*value),
            ScalarField::Scaled { factor, field } => field.as_constant().map(|c| c * factor),
            _ => None,
        }
    }

    /// Checks parameters, recursively, against the ambient dimension.
    pub fn validate(&self, dim: usize) -> Result<(), GeometryError> {
        let bad = |m: String| Err(GeometryError::InvalidParameter(m));
        let check_point = |p: &Point, what: &str| {
            if p.dim() != dim {
                Err(GeometryError::InvalidParameter(format!(
                    "{what} has dimension {}, expected {dim}",
                    p.dim()
                )))
            } else {
                Ok(())
            }
        };
        match self {
            ScalarField::Constant { value } if !value.is_finite() => bad("non-finite constant".into()),
            ScalarField::Constant { .. } => Ok(()),
            ScalarField::Linear { slope, .. } => check_point(slope, "slope"),
            ScalarField::Quadratic { center, .. } => check_point(center, "center"),
            ScalarField::Axis { axis, profile } => {
                if *axis >= dim {
                    return bad(format!("axis {axis} out of range for dimension {dim}"));
                }
                profile.validate()
            }
            ScalarField::Radial { center, profile } => {
                check_point(center, "center")?;
                profile.validate()
            }
            ScalarField::LogRadial { center, radius } => {
                check_point(center, "center")?;
                if !(*radius > 0.0) {
                    return bad(format!("radius must be positive, got {radius}"));
                }
                Ok(())
            }
            ScalarField::SignedDistance { domain } => {
                domain.validate()?;
                if domain.dim() != dim {
                    return Err(GeometryError::Dimension(domain.dim()));
                }
                Ok(())
            }
            ScalarField::ComparisonPotential { radius, center, .. } => {
                check_point(center, "center")?;
                if !(*radius > 0.0) {
                    return bad(format!("radius must be positive, got {radius}"));
                }
                Ok(())
            }
            ScalarField::Dipole { center, radius } => {
                check_point(center, "center")?;
                if dim < 2 {
                    return Err(GeometryError::Dimension(dim));
                }
                if !(*radius > 0.0) {
                    return bad(format!("radius must be positive, got {radius}"));
                }
                Ok(())
            }
            ScalarField::ConvexificationWeight { domain, ell, eps } => {
                if !(*eps > 0.0) {
                    return bad(format!("eps must be positive, got {eps}"));
                }
                ScalarField::SignedDistance {
                    domain: domain.clone(),
                }
                .validate(dim)?;
                ell.validate(dim)
            }
            ScalarField::Scaled { field, .. } | ScalarField::Exp { field } => field.validate(dim),
            ScalarField::Sum { terms: fs } | ScalarField::Product { factors: fs } => {
                fs.iter().try_for_each(|f| f.validate(dim))
            }
        }
    }

    pub fn value(&self, x: &Point) -> f64 {
        match self {
            ScalarField::Constant { value } => *value,
            ScalarField::Linear { slope, offset } => slope.dot(x) + offset,
            ScalarField::Quadratic { center, scale } => 0.5 * scale * (*x - *center).norm_sq(),
            ScalarField::Axis { axis, profile } => profile.value(x.coord(*axis)),
            ScalarField::Radial { center, profile } => profile.value(x.distance(center)),
            ScalarField::LogRadial { center, radius } => -(x.distance(center) / radius).ln(),
            ScalarField::SignedDistance { domain } => domain.signed_distance(x),
            ScalarField::ComparisonPotential {
                radius,
                center,
                curvature,
            } => comparison_profile(*radius, *curvature, x.distance(center)).0,
            ScalarField::Dipole { center, radius } => {
                let d = *x - *center;
                let n = x.dim() as i32;
                let c = radius.powi(n) / (n as f64 - 1.0);
                d.coord(0) * (1.0 + c * d.norm().powi(-n))
            }
            ScalarField::ConvexificationWeight { domain, ell, eps } => {
                (eps - ell.value(x)) * domain.signed_distance(x)
            }
            ScalarField::Scaled { factor, field } => factor * field.value(x),
            ScalarField::Sum { terms } => terms.iter().map(|f| f.value(x)).sum(),
            ScalarField::Product { factors } => factors.iter().map(|f| f.value(x)).product(),
            ScalarField::Exp { field } => field.value(x).exp(),
        }
    }

    pub fn gradient(&self, x: &Point) -> Result<Vector, GeometryError> {
        Ok(self.jet(x)?.grad)
    }

    pub fn laplacian(&self, x: &Point) -> Result<f64, GeometryError> {
        Ok(self.jet(x)?.lap)
    }

    /// `Γ(f)(x) = |∇f(x)|²`.
    pub fn carre_du_champ(&self, x: &Point) -> Result<f64, GeometryError> {
        Ok(self.gradient(x)?.norm_sq())
    }

    pub(crate) fn jet(&self, x: &Point) -> Result<Jet, GeometryError> {
        let dim = x.dim();
        let zero = Point::origin(dim);
        let jet = |value, grad, lap| Ok(Jet { value, grad, lap });
        match self {
            ScalarField::Constant { value } => jet(*value, zero, 0.0),
            ScalarField::Linear { slope, offset } => jet(slope.dot(x) + offset, *slope, 0.0),
            ScalarField::Quadratic { center, scale } => {
                let d = *x - *center;
                jet(0.5 * scale * d.norm_sq(), d * *scale, scale * dim as f64)
            }
            ScalarField::Axis { axis, profile } => {
                let (g, dg, ddg) = profile.eval3(x.coord(*axis));
                jet(g, Point::unit(dim, *axis) * dg, ddg)
            }
            ScalarField::Radial { center, profile } => {
                let d = *x - *center;
                let rho = d.norm();
                let (g, dg, ddg) = profile.eval3(rho);
                if rho < CENTER_EPS {
                    if dg.abs() > 1e-14 {
                        return Err(GeometryError::Singular {
                            what: "radial field",
                            at: *x,
                        });
                    }
                    return jet(g, zero, dim as f64 * ddg);
                }
                jet(g, d * (dg / rho), ddg + (dim as f64 - 1.0) * dg / rho)
            }
            ScalarField::LogRadial { center, radius } => {
                let d = *x - *center;
                let r2 = d.norm_sq();
                if r2.sqrt() < CENTER_EPS * radius {
                    return Err(GeometryError::Singular {
                        what: "logarithmic weight",
                        at: *x,
                    });
                }
                jet(
                    -0.5 * (r2 / (radius * radius)).ln(),
                    d * (-1.0 / r2),
                    -(dim as f64 - 2.0) / r2,
                )
            }
            ScalarField::SignedDistance { domain } => jet(
                domain.signed_distance(x),
                domain.signed_distance_gradient(x)?,
                domain.signed_distance_laplacian(x)?,
            ),
            ScalarField::ComparisonPotential {
                radius,
                center,
                curvature,
            } => {
                let d = *x - *center;
                let rho = d.norm();
                let (f, df, ddf) = comparison_profile(*radius, *curvature, rho);
                if rho < CENTER_EPS * radius {
                    // F'(0) = 0 for every curvature branch
                    return jet(f, zero, dim as f64 * ddf);
                }
                jet(f, d * (df / rho), ddf + (dim as f64 - 1.0) * df / rho)
            }
            ScalarField::Dipole { center, radius } => {
                let d = *x - *center;
                let rho = d.norm();
                if rho < CENTER_EPS * radius {
                    return Err(GeometryError::Singular {
                        what: "dipole field",
                        at: *x,
                    });
                }
                let n = dim as i32;
                let c = radius.powi(n) / (n as f64 - 1.0);
                let rn = rho.powi(-n);
                let x1 = d.coord(0);
                let grad = Point::unit(dim, 0) * (1.0 + c * rn) - d * (c * n as f64 * x1 * rn / (rho * rho));
                jet(x1 * (1.0 + c * rn), grad, 0.0)
            }
            ScalarField::ConvexificationWeight { domain, ell, eps } => {
                let a = ScalarField::Constant { value: *eps }
                    .plus(ell.as_ref().clone().scaled(-1.0))
                    .times(ScalarField::SignedDistance {
                        domain: domain.clone(),
                    });
                a.jet(x)
            }
            ScalarField::Scaled { factor, field } => {
                let j = field.jet(x)?;
                jet(factor * j.value, j.grad * *factor, factor * j.lap)
            }
            ScalarField::Sum { terms } => {
                let mut acc = Jet {
                    value: 0.0,
                    grad: zero,
                    lap: 0.0,
                };
                for t in terms {
                    let j = t.jet(x)?;
                    acc.value += j.value;
                    acc.grad += j.grad;
                    acc.lap += j.lap;
                }
                Ok(acc)
            }
            ScalarField::Product { factors } => {
                let mut acc = Jet {
                    value: 1.0,
                    grad: zero,
                    lap: 0.0,
                };
                for f in factors {
                    let j = f.jet(x)?;
                    acc = Jet {
                        value: acc.value * j.value,
                        grad: acc.grad * j.value + j.grad * acc.value,
                        lap: acc.lap * j.value + j.lap * acc.value + 2.0 * acc.grad.dot(&j.grad),
                    };
                }
                Ok(acc)
            }
            ScalarField::Exp { field } => {
                let j = field.jet(x)?;
                let e = j.value.exp();
                jet(e, j.grad * e, e * (j.lap + j.grad.norm_sq()))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Bump;
    use proptest::prelude::*;

    fn fd_errors(f: &ScalarField, x: &Point, h: f64) -> (f64, f64) {
        let j = f.jet(x).unwrap();
        let n = x.dim();
        let mut lap = 0.0;
        let mut gerr: f64 = 0.0;
        for i in 0..n {
            let e = Point::unit(n, i) * h;
            let (p, m) = (f.value(&(*x + e)), f.value(&(*x - e)));
            gerr = gerr.max(((p - m) / (2.0 * h) - j.grad.coord(i)).abs());
            lap += (p - 2.0 * j.value + m) / (h * h);
        }
        (gerr, (lap - j.lap).abs())
    }

    fn sample_fields() -> Vec<ScalarField> {
        let c = Point::xy(0.1, -0.2);
        vec![
            ScalarField::Quadratic { center: c, scale: 1.5 },
            ScalarField::Axis {
                axis: 0,
                profile: Profile::Sin {
                    amplitude: 0.3,
                    frequency: 1.0,
                    phase: 0.0,
                },
            },
            ScalarField::Radial {
                center: c,
                profile: Profile::Cos {
                    amplitude: 1.0,
                    frequency: 2.0,
                },
            },
            ScalarField::LogRadial {
                center: Point::xy(0.0, 0.0),
                radius: 1.0,
            },
            ScalarField::ComparisonPotential {
                radius: 1.0,
                center: c,
                curvature: 0.7,
            },
            ScalarField::ComparisonPotential {
                radius: 1.0,
                center: c,
                curvature: -0.7,
            },
            ScalarField::Dipole {
                center: Point::xy(0.0, 0.0),
                radius: 0.5,
            },
            ScalarField::ConvexificationWeight {
                domain: Domain::ball_complement(Point::xy(0.0, 0.0), 1.0).unwrap(),
                ell: Box::new(ScalarField::Axis {
                    axis: 1,
                    profile: Profile::Gaussian {
                        amplitude: -1.0,
                        width: 1.0,
                    },
                }),
                eps: 0.05,
            },
            ScalarField::Exp {
                field: Box::new(ScalarField::Linear {
                    slope: Point::xy(0.3, -0.4),
                    offset: 0.1,
                }),
            },
            ScalarField::Product {
                factors: vec![
                    ScalarField::Axis {
                        axis: 0,
                        profile: Profile::Cantor {
                            level: 2,
                            bump: Bump::CosSquared,
                        },
                    },
                    ScalarField::Axis {
                        axis: 1,
                        profile: Profile::Eta,
                    },
                ],
            },
        ]
    }

    #[test]
    fn finite_difference_order() {
        let points = [Point::xy(0.37, 0.61), Point::xy(-0.52, 0.84), Point::xy(1.3, -0.45)];
        for f in sample_fields() {
            for x in &points {
                let (g1, l1) = fd_errors(&f, x, 1e-2);
                let (g2, l2) = fd_errors(&f, x, 5e-3);
                for (e1, e2) in [(g1, g2), (l1, l2)] {
                    if e1 > 1e-9 {
                        let order = (e1 / e2).log2();
                        assert!(order >= 1.9, "{f:?} at {x:?}: order {order} ({e1} -> {e2})");
                    }
                }
            }
        }
    }

    #[test]
    fn dipole_is_neumann_on_its_sphere() {
        for n in [2usize, 3] {
            let f = ScalarField::Dipole {
                center: Point::origin(n),
                radius: 0.7,
            };
            let mut x = Point::origin(n);
            x.set_coord(0, 0.7 * 0.6);
            x.set_coord(1, 0.7 * 0.8);
            let g = f.gradient(&x).unwrap();
            assert!(g.dot(&x).abs() < 1e-14);
        }
        let f3 = ScalarField::Dipole {
            center: Point::origin(3),
            radius: 1.0,
        };
        // |∇f| = 1 + 1/(n−1) on the equator
        let g = f3.gradient(&Point::xyz(0.0, 1.0, 0.0)).unwrap();
        assert!((g.norm() - 1.5).abs() < 1e-14);
    }

    #[test]
    fn radial_center_handling() {
        let smooth = ScalarField::Radial {
            center: Point::xy(0.0, 0.0),
            profile: Profile::Cos {
                amplitude: 1.0,
                frequency: 1.0,
            },
        };
        assert_eq!(smooth.laplacian(&Point::xy(0.0, 0.0)).unwrap(), -2.0);
        let kink = ScalarField::Radial {
            center: Point::xy(0.0, 0.0),
            profile: Profile::Poly { coeffs: vec![0.0, 1.0] },
        };
        assert!(kink.gradient(&Point::xy(0.0, 0.0)).is_err());
    }

    #[test]
    fn convexification_weight_examples() {
        let dom = Domain::ball_complement(Point::xy(0.0, 0.0), 1.0).unwrap();
        let psi = ScalarField::ConvexificationWeight {
            domain: dom,
            ell: Box::new(ScalarField::constant(-1.0)),
            eps: 0.01,
        };
        assert!((psi.value(&Point::xy(0.5, 0.0)) - 0.505).abs() < 1e-15);
        assert_eq!(psi.value(&Point::xy(0.0, 1.0)), 0.0);
    }

    #[test]
    fn serde_round_trip() {
        for f in sample_fields() {
            let s = serde_json::to_string(&f).unwrap();
            let g: ScalarField = serde_json::from_str(&s).unwrap();
            assert_eq!(f, g);
        }
    }

    proptest! {
        #[test]
        fn ball_eikonal_and_laplacian(x in -3.0f64..3.0, y in -3.0f64..3.0, z in -3.0f64..3.0) {
            let p = Point::xyz(x, y, z);
            prop_assume!(p.norm() > 1e-3);
            let d = Domain::ball(Point::origin(3), 1.3).unwrap();
            let g = d.signed_distance_gradient(&p).unwrap();
            prop_assert!((g.norm() - 1.0).abs() < 1e-10);
            let lap = d.signed_distance_laplacian(&p).unwrap();
            prop_assert!((lap - 2.0 / p.norm()).abs() < 1e-10);
        }

        #[test]
        fn reflection_is_idempotent(x in -3.0f64..3.0, y in -3.0f64..3.0) {
            let p = Point::xy(x, y);
            prop_assume!(p.norm() > 1e-6);
            let domains = [
                Domain::ball(Point::xy(0.0, 0.0), 1.0).unwrap(),
                Domain::ball_complement(Point::xy(0.0, 0.0), 1.0).unwrap(),
                Domain::half_space(2, 1, 0.2).unwrap(),
                Domain::cuboid(Point::xy(-1.0, -0.5), Point::xy(1.0, 0.5)).unwrap(),
            ];
            for d in &domains {
                let r = d.reflect_into(&p).unwrap();
                prop_assert!(d.signed_distance(&r.point) <= 1e-12);
                let rr = d.reflect_into(&r.point).unwrap();
                prop_assert_eq!(rr.push, 0.0);
            }
        }

        #[test]
        fn box_and_half_space_eikonal(x in -3.0f64..3.0, y in -3.0f64..3.0) {
            let p = Point::xy(x, y);
            let b = Domain::cuboid(Point::xy(-1.0, -0.5), Point::xy(1.0, 0.5)).unwrap();
            let g = b.signed_distance_gradient(&p).unwrap();
            prop_assert!((g.norm() - 1.0).abs() < 1e-10);
        }
    }
}
