use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::GeometryError;

/// Deepest Cantor level accepted; beyond this the bumps are far below grid scales.
pub const MAX_CANTOR_LEVEL: u32 = 12;

/// One-dimensional profile `g` with closed-form `g'` and `g''`.
///
/// Profiles are the building blocks of axis-aligned and radial fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Profile {
    /// `Σ cᵢ xⁱ`.
    Poly { coeffs: Vec<f64> },
    /// `a sin(ω x + φ)`.
    Sin {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `a cos(ω x)`.
    Cos { amplitude: f64, frequency: f64 },
    /// `a exp(−x²/(2w²))`.
    Gaussian { amplitude: f64, width: f64 },
    /// Compactly supported bump on `(−½, ½)`.
    Bump { bump: Bump },
    /// `η(t) = (t²−1)³ t` on `[−1, 1]`, zero outside.
    Eta,
    /// Cantor superposition `Φ_j` of bumps centred in the removed mid-thirds of `[0, 1]`.
    Cantor { level: u32, bump: Bump },
}

/// Bumps `φ ≥ 0` with `{φ > 0} = (−½, ½)` and two continuous derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bump {
    /// `cos²(πx)`.
    CosSquared,
    /// `(1 − 4x²)³`.
    Polynomial,
}

impl Default for Bump {
    fn default() -> Self {
        Bump::CosSquared
    }
}

impl Bump {
    /// `(φ, φ', φ'')` at `x`.
    pub fn eval3(self, x: f64) -> (f64, f64, f64) {
        if x.abs() >= 0.5 {
            return (0.0, 0.0, 0.0);
        }
        match self {
            Bump::CosSquared => {
                let c = (PI * x).cos();
                (c * c, -PI * (2.0 * PI * x).sin(), -2.0 * PI * PI * (2.0 * PI * x).cos())
            }
            Bump::Polynomial => {
                let q = 1.0 - 4.0 * x * x;
                (q * q * q, -24.0 * x * q * q, q * (480.0 * x * x - 24.0))
            }
        }
    }

    pub fn sup(self) -> f64 {
        1.0
    }

    /// `‖φ'‖∞`.
    pub fn sup_derivative(self) -> f64 {
        match self {
            Bump::CosSquared => PI,
            // attained where 1 − 20x² = 0
            Bump::Polynomial => {
                let x = (1.0f64 / 20.0).sqrt();
                let q = 1.0 - 4.0 * x * x;
                24.0 * x * q * q
            }
        }
    }
}

impl Profile {
    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |m: String| Err(GeometryError::InvalidParameter(m));
        match self {
            Profile::Poly { coeffs } if coeffs.iter().any(|c| !c.is_finite()) => {
                bad("polynomial coefficients must be finite".into())
            }
            Profile::Gaussian { width, .. } if !(*width > 0.0) => {
                bad(format!("gaussian width must be positive, got {width}"))
            }
            Profile::Cantor { level, .. } if *level > MAX_CANTOR_LEVEL => bad(format!(
                "cantor level {level} exceeds the supported maximum {MAX_CANTOR_LEVEL}"
            )),
            _ => Ok(()),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval3(x).0
    }

    /// `(g, g', g'')` at `x`.
    pub fn eval3(&self, x: f64) -> (f64, f64, f64) {
        match self {
            Profile::Poly { coeffs } => {
                let (mut p, mut dp, mut ddp) = (0.0, 0.0, 0.0);
                for &c in coeffs.iter().rev() {
                    ddp = ddp * x + 2.0 * dp;
                    dp = dp * x + p;
                    p = p * x + c;
                }
                (p, dp, ddp)
            }
            Profile::Sin {
                amplitude,
                frequency,
                phase,
            } => {
                let a = frequency * x + phase;
                let (s, c) = a.sin_cos();
                (
                    amplitude * s,
                    amplitude * frequency * c,
                    -amplitude * frequency * frequency * s,
                )
            }
            Profile::Cos {
                amplitude,
                frequency,
            } => {
                let (s, c) = (frequency * x).sin_cos();
                (
                    amplitude * c,
                    -amplitude * frequency * s,
                    -amplitude * frequency * frequency * c,
                )
            }
            Profile::Gaussian { amplitude, width } => {
                let w2 = width * width;
                let g = amplitude * (-x * x / (2.0 * w2)).exp();
                (g, -x / w2 * g, (x * x / w2 - 1.0) / w2 * g)
            }
            Profile::Bump { bump } => bump.eval3(x),
            Profile::Eta => {
                if x.abs() >= 1.0 {
                    return (0.0, 0.0, 0.0);
                }
                let q = x * x - 1.0;
                (
                    q * q * q * x,
                    q * q * (7.0 * x * x - 1.0),
                    q * (42.0 * x * x * x - 18.0 * x),
                )
            }
            Profile::Cantor { level, bump } => cantor_eval3(*level, *bump, x),
        }
    }
}

/// Ternary descent: the bump supports are disjoint, so at most one term of the
/// double sum is nonzero at any point.
fn cantor_eval3(level: u32, bump: Bump, x: f64) -> (f64, f64, f64) {
    if !(0.0..=1.0).contains(&x) {
        return (0.0, 0.0, 0.0);
    }
    let mut y = x;
    let mut scale = 1.0;
    for _ in 0..level {
        scale *= 3.0;
        if y > 1.0 / 3.0 && y < 2.0 / 3.0 {
            let (p, dp, ddp) = bump.eval3(3.0 * (y - 0.5));
            return (p / scale, dp, ddp * scale);
        }
        y = if y <= 1.0 / 3.0 { 3.0 * y } else { 3.0 * y - 2.0 };
    }
    (0.0, 0.0, 0.0)
}
