//! PDE side of the gradient checks: `|∇P_t f|` at probe points on the `x₁` ray.

use super::VerifyError;
use crate::geometry::{Domain, Point, ScalarField};
use crate::semigroup::{neumann_heat, Grid, GridFunction, GridSpec};

/// Angular mode of `f` about `center`: 0 for rotation-invariant fields, 1 for
/// fields of the form `a(|x − c|)·cos θ` with `θ` the angle to `e₁`.
pub fn angular_mode(f: &ScalarField, center: &Point) -> Result<u32, VerifyError> {
    let unsupported = || {
        Err(VerifyError::Unsupported(format!(
            "cannot decompose {f:?} into a single angular mode about {center:?}"
        )))
    };
    match f {
        ScalarField::Constant { .. } => Ok(0),
        ScalarField::Radial { center: c, .. }
        | ScalarField::Quadratic { center: c, .. }
        | ScalarField::ComparisonPotential { center: c, .. }
            if c == center =>
        {
            Ok(0)
        }
        ScalarField::Linear { slope, .. } => {
            let along = slope.coords().iter().skip(1).all(|s| *s == 0.0);
            if along && f.value(center).abs() <= 1e-14 * (1.0 + slope.norm() * center.norm()) {
                Ok(1)
            } else {
                unsupported()
            }
        }
        ScalarField::Dipole { center: c, .. } if c == center => Ok(1),
        ScalarField::Scaled { field, .. } => angular_mode(field, center),
        ScalarField::Sum { terms } => {
            let mut mode = None;
            let mut constant = 0.0;
            for t in terms {
                match t.as_constant() {
                    Some(c) => constant += c.abs(),
                    None => {
                        let m = angular_mode(t, center)?;
                        if mode.is_some_and(|prev| prev != m) {
                            return unsupported();
                        }
                        mode = Some(m);
                    }
                }
            }
            match mode {
                Some(1) if constant != 0.0 => unsupported(),
                Some(m) => Ok(m),
                None => Ok(0),
            }
        }
        _ => unsupported(),
    }
}

/// Grid for the PDE side, and the map from probe abscissae to points.
pub(crate) struct ProbeGrid {
    pub grid: Grid,
    center: Point,
    one_d: bool,
    mode: u32,
}

/// Probe position: abscissa (interval coordinate or distance to the centre) and
/// angle from `e₁` in the `x₁x₂` plane.
pub(crate) type Probe = (f64, f64);

impl ProbeGrid {
    /// `cells` count across the domain's length scale. For a ball complement the
    /// shell is cut at `max(abscissae) + reach`.
    pub fn new(domain: &Domain, f: &ScalarField, probes: &[Probe], cells: usize, reach: f64) -> Result<Self, VerifyError> {
        let abscissae: Vec<f64> = probes.iter().map(|p| p.0).collect();
        let far = abscissae.iter().cloned().fold(0.0, f64::max);
        let (spec, center, one_d) = match domain {
            Domain::Interval { a, b } => {
                if abscissae.iter().any(|x| *x < *a || *x > *b) {
                    return Err(VerifyError::InvalidParameter("probe outside the interval".into()));
                }
                (GridSpec::Interval { a: *a, b: *b, cells }, Point::x(0.0), true)
            }
            Domain::Ball { center, radius } => {
                if abscissae.iter().any(|r| *r < 0.0 || *r > *radius) {
                    return Err(VerifyError::InvalidParameter("probe outside the ball".into()));
                }
                let spec = GridSpec::Radial {
                    r_in: 0.0,
                    r_out: *radius,
                    cells,
                    dim: center.dim(),
                    mode: angular_mode(f, center)?,
                };
                (spec, *center, false)
            }
            Domain::BallComplement { center, radius } => {
                if abscissae.iter().any(|r| *r < *radius) {
                    return Err(VerifyError::InvalidParameter("probe inside the removed ball".into()));
                }
                let r_out = far.max(*radius) + reach;
                let spec = GridSpec::Radial {
                    r_in: *radius,
                    r_out,
                    cells: ((cells as f64) * (r_out - radius) / radius).ceil() as usize,
                    dim: center.dim(),
                    mode: angular_mode(f, center)?,
                };
                (spec, *center, false)
            }
            other => {
                return Err(VerifyError::Unsupported(format!(
                    "the PDE gradient is available on intervals, balls and ball complements, not {other:?}"
                )))
            }
        };
        let mode = match spec {
            GridSpec::Radial { mode, .. } => mode,
            _ => 0,
        };
        Ok(ProbeGrid {
            grid: Grid::new(spec)?,
            center,
            one_d,
            mode,
        })
    }

    /// `x = s` on an interval, `c + s(cos θ e₁ + sin θ e₂)` otherwise.
    pub fn point(&self, (s, angle): Probe) -> Point {
        if self.one_d {
            return Point::x(s);
        }
        let dim = self.center.dim();
        self.center + (Point::unit(dim, 0) * angle.cos() + Point::unit(dim, 1) * angle.sin()) * s
    }

    pub fn sample(&self, f: &ScalarField) -> GridFunction {
        GridFunction::new(self.grid.nodes().iter().map(|p| f.value(&self.point((p.coord(0), 0.0)))).collect())
    }

    /// `|∇P_t f|` at the probes, `P_t = e^{tΔ}` Neumann. For the mode
    /// `a(ρ)cos θ` the gradient is `(a′cos θ, −a sin θ/ρ)`.
    pub fn heat_gradient(&self, f: &ScalarField, t: f64, probes: &[Probe]) -> Result<Vec<f64>, VerifyError> {
        let u = neumann_heat(&self.grid, &self.sample(f), t)?;
        probes
            .iter()
            .map(|&(s, angle)| {
                let (a, da) = self.grid.interpolate_1d(&u, s)?;
                Ok(if self.mode == 0 {
                    da.abs()
                } else {
                    (da * angle.cos()).hypot(a * angle.sin() / s)
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Profile;

    #[test]
    fn modes() {
        let c = Point::xy(0.0, 0.0);
        let radial = ScalarField::Radial {
            center: c,
            profile: Profile::Cos {
                amplitude: 1.0,
                frequency: 2.0,
            },
        };
        let x1 = ScalarField::Linear {
            slope: Point::xy(2.0, 0.0),
            offset: 0.0,
        };
        assert_eq!(angular_mode(&radial, &c).unwrap(), 0);
        assert_eq!(angular_mode(&radial.clone().plus(ScalarField::constant(1.0)), &c).unwrap(), 0);
        assert_eq!(angular_mode(&x1.clone().scaled(-1.0), &c).unwrap(), 1);
        assert_eq!(angular_mode(&ScalarField::Dipole { center: c, radius: 1.0 }, &c).unwrap(), 1);
        assert!(angular_mode(&x1.clone().plus(ScalarField::constant(1.0)), &c).is_err());
        assert!(angular_mode(&x1.plus(radial), &c).is_err());
        let tilted = ScalarField::Linear {
            slope: Point::xy(1.0, 1.0),
            offset: 0.0,
        };
        assert!(angular_mode(&tilted, &c).is_err());
    }

    #[test]
    fn interval_gradient_of_the_cosine_mode() {
        let d = Domain::interval(0.0, std::f64::consts::PI).unwrap();
        let f = ScalarField::Axis {
            axis: 0,
            profile: Profile::Cos {
                amplitude: 1.0,
                frequency: 1.0,
            },
        };
        let xs = [(0.3, 0.0), (1.2, 0.0), (2.9, 0.0)];
        let pg = ProbeGrid::new(&d, &f, &xs, 512, 0.0).unwrap();
        let g = pg.heat_gradient(&f, 0.4, &xs).unwrap();
        for ((x, _), v) in xs.iter().zip(g) {
            assert!((v - (-0.4f64).exp() * x.sin()).abs() < 1e-4);
        }
    }

    #[test]
    fn dipole_is_stationary() {
        let c = Point::xyz(0.0, 0.0, 0.0);
        let d = Domain::ball_complement(c, 1.0).unwrap();
        let f = ScalarField::Dipole { center: c, radius: 1.0 };
        let probes = [(1.0, 0.0), (1.0, std::f64::consts::FRAC_PI_2), (1.5, 0.7)];
        let pg = ProbeGrid::new(&d, &f, &probes, 200, 10.0).unwrap();
        let g = pg.heat_gradient(&f, 0.5, &probes).unwrap();
        for (p, v) in probes.iter().zip(g) {
            let exact = f.gradient(&pg.point(*p)).unwrap().norm();
            assert!((v - exact).abs() < 1e-3, "{p:?}: {v} vs {exact}");
        }
    }

    #[test]
    fn linear_mode_in_a_disc() {
        // x₁ on the unit disc: the slowest mode has λ = j′₁₁², so the gradient
        // at the centre decays at least that fast after the initial transient
        let d = Domain::ball(Point::xy(0.0, 0.0), 1.0).unwrap();
        let f = ScalarField::Linear {
            slope: Point::xy(1.0, 0.0),
            offset: 0.0,
        };
        let probes = [(0.5, 0.0), (0.5, 1.0)];
        let pg = ProbeGrid::new(&d, &f, &probes, 400, 0.0).unwrap();
        let g0 = pg.heat_gradient(&f, 0.0, &probes).unwrap();
        assert!((g0[0] - 1.0).abs() < 1e-10 && (g0[1] - 1.0).abs() < 1e-10);
        let g1 = pg.heat_gradient(&f, 0.5, &probes[..1]).unwrap()[0];
        let g2 = pg.heat_gradient(&f, 1.0, &probes[..1]).unwrap()[0];
        let lambda = crate::semigroup::bessel_j_prime_first_zero(1).powi(2);
        assert!(((g1 / g2).ln() / 0.5 - lambda).abs() < 1e-2 * lambda);
    }
}
