use serde::{Deserialize, Serialize};

use super::ConformalError;
use crate::geometry::{Point, ScalarField};

/// Curvature-dimension data `(k, N, N′)` of a space to be time-changed.
/// `n_prime = None` stands for `N′ = ∞`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvatureBoundSpec {
    pub k: ScalarField,
    pub n: f64,
    #[serde(default)]
    pub n_prime: Option<f64>,
}

impl CurvatureBoundSpec {
    pub fn new(k: ScalarField, n: f64, n_prime: Option<f64>) -> Result<Self, ConformalError> {
        let s = CurvatureBoundSpec { k, n, n_prime };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ConformalError> {
        if !(self.n >= 2.0 && self.n.is_finite()) {
            return Err(ConformalError::InvalidParameter(format!("N must be ≥ 2, got {}", self.n)));
        }
        if let Some(np) = self.n_prime {
            if !(np > self.n) {
                return Err(ConformalError::InvalidParameter(format!("N′ = {np} must exceed N = {}", self.n)));
            }
        }
        Ok(())
    }

    /// Coefficient of `Γ(ψ)`: `(N−2)(N′−2)/(N′−N)`, and `N − 2` for `N′ = ∞`.
    pub fn gamma_coefficient(&self) -> f64 {
        match self.n_prime {
            Some(np) if np.is_finite() => (self.n - 2.0) * (np - 2.0) / (np - self.n),
            _ => self.n - 2.0,
        }
    }

    /// `N* = 2 + (N−2)(N′−2)/(N′−N)`.
    pub fn n_star(&self) -> f64 {
        2.0 + self.gamma_coefficient()
    }
}

/// `k′(x) = e^{−2ψ}[k − Δψ − c Γ(ψ)]` with `c` the Γ-coefficient of `spec`.
pub fn timechange_curvature(spec: &CurvatureBoundSpec, psi: &ScalarField, x: &Point) -> Result<f64, ConformalError> {
    spec.validate()?;
    let j = psi.jet(x)?;
    let k = spec.k.value(x);
    Ok((-2.0 * j.value).exp() * (k - j.lap - spec.gamma_coefficient() * j.grad.norm_sq()))
}

/// The same bound written in `φ = e^{−ψ}`:
/// `k′ = kφ² + ½Δφ² − (2 + c)Γ(φ)`.
pub fn timechange_curvature_phi(spec: &CurvatureBoundSpec, phi: &ScalarField, x: &Point) -> Result<f64, ConformalError> {
    spec.validate()?;
    let j = phi.jet(x)?;
    if !(j.value > 0.0) {
        return Err(ConformalError::InvalidParameter(format!("φ must be positive, got {} at {x:?}", j.value)));
    }
    let gamma = j.grad.norm_sq();
    let half_lap_sq = j.value * j.lap + gamma;
    Ok(spec.k.value(x) * j.value * j.value + half_lap_sq - (2.0 + spec.gamma_coefficient()) * gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Profile;
    use rand::{Rng, SeedableRng};

    #[test]
    fn examples() {
        let k = ScalarField::Axis {
            axis: 0,
            profile: Profile::Cos {
                amplitude: 2.0,
                frequency: 1.0,
            },
        };
        let spec = CurvatureBoundSpec::new(k.clone(), 3.0, Some(5.0)).unwrap();
        let x = Point::xy(0.4, -0.3);
        let c = 0.3;
        let v = timechange_curvature(&spec, &ScalarField::constant(c), &x).unwrap();
        assert!((v - (-2.0 * c).exp() * k.value(&x)).abs() < 1e-14);

        let flat = CurvatureBoundSpec::new(ScalarField::zero(), 2.0, None).unwrap();
        let psi = ScalarField::Quadratic {
            center: Point::xy(0.1, 0.0),
            scale: 0.7,
        };
        let v = timechange_curvature(&flat, &psi, &x).unwrap();
        assert!((v + (-2.0 * psi.value(&x)).exp() * 1.4).abs() < 1e-14);

        let spec = CurvatureBoundSpec::new(ScalarField::zero(), 3.0, Some(4.0)).unwrap();
        let lin = ScalarField::Linear {
            slope: Point::xy(1.0, 0.0),
            offset: 0.0,
        };
        assert!((timechange_curvature(&spec, &lin, &Point::xy(0.0, 0.0)).unwrap() + 2.0).abs() < 1e-15);
        assert_eq!(spec.n_star(), 4.0);

        assert!(CurvatureBoundSpec::new(ScalarField::zero(), 3.0, Some(3.0)).is_err());
        assert!(CurvatureBoundSpec::new(ScalarField::zero(), 3.0, Some(2.5)).is_err());
    }

    #[test]
    fn psi_and_phi_forms_agree() {
        let psi = ScalarField::Axis {
            axis: 0,
            profile: Profile::Sin {
                amplitude: 0.8,
                frequency: 1.3,
                phase: 0.2,
            },
        }
        .plus(ScalarField::Quadratic {
            center: Point::xyz(0.2, 0.1, -0.3),
            scale: -0.4,
        });
        let phi = ScalarField::Exp {
            field: Box::new(psi.clone().scaled(-1.0)),
        };
        let k = ScalarField::Radial {
            center: Point::xyz(0.0, 0.0, 0.0),
            profile: Profile::Gaussian {
                amplitude: 1.5,
                width: 0.8,
            },
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for spec in [
            CurvatureBoundSpec::new(k.clone(), 3.0, Some(7.0)).unwrap(),
            CurvatureBoundSpec::new(k.clone(), 2.0, None).unwrap(),
            CurvatureBoundSpec::new(k.clone(), 4.5, None).unwrap(),
        ] {
            for _ in 0..1000 {
                let x = Point::xyz(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
                let a = timechange_curvature(&spec, &psi, &x).unwrap();
                let b = timechange_curvature_phi(&spec, &phi, &x).unwrap();
                assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-3), "{a} vs {b}");
            }
        }
    }
}
