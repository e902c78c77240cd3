use std::f64::consts::PI;
use web_time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{geodesic_with_info, ConformalError, GeodesicParams, Polyline};
use crate::geometry::{Domain, GeometryError, Point, ScalarField};
use crate::report::Report;
use crate::stochastic::map_paths;

/// `ψ = (ε − ℓ)·V`.
pub fn convexification_weight(domain: &Domain, ell: &ScalarField, eps: f64) -> Result<ScalarField, ConformalError> {
    let psi = ScalarField::ConvexificationWeight {
        domain: domain.clone(),
        ell: Box::new(ell.clone()),
        eps,
    };
    psi.validate(domain.dim())?;
    Ok(psi)
}

/// Point pairs for [`check_local_convexity`], on ball-type domains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PairSampler {
    /// Boundary pairs with angular separations `max_angle·(i+1)/pairs`.
    Boundary { pairs: usize, max_angle: f64 },
    /// Random pairs in `Y` within `radius` of the boundary and of each other;
    /// the radius defaults to a quarter of the ball radius.
    Covering {
        pairs: usize,
        #[serde(default)]
        radius: Option<f64>,
        #[serde(default)]
        seed: u64,
    },
}

impl PairSampler {
    pub fn pairs(&self, domain: &Domain) -> Result<Vec<(Point, Point)>, ConformalError> {
        let (center, r) = match domain {
            Domain::Ball { center, radius } | Domain::BallComplement { center, radius } => (*center, *radius),
            other => {
                return Err(GeometryError::UnsupportedGeometry(format!(
                    "pair sampling needs a ball or ball complement, got {other:?}"
                ))
                .into())
            }
        };
        let dim = domain.dim();
        if dim < 2 {
            return Err(GeometryError::Dimension(dim).into());
        }
        match *self {
            PairSampler::Boundary { pairs, max_angle } => {
                if !(max_angle > 0.0 && max_angle < PI) {
                    return Err(ConformalError::InvalidParameter(format!("max_angle must lie in (0, π), got {max_angle}")));
                }
                let golden = 0.5 * (5f64.sqrt() - 1.0);
                Ok((0..pairs)
                    .map(|i| {
                        let theta = 2.0 * PI * (i as f64 * golden).fract();
                        let tilt = PI * (i as f64 * std::f64::consts::SQRT_2).fract();
                        let (e1, e2) = frame(dim, theta, tilt);
                        let delta = max_angle * (i + 1) as f64 / pairs as f64;
                        (center + e1 * r, center + (e1 * delta.cos() + e2 * delta.sin()) * r)
                    })
                    .collect())
            }
            PairSampler::Covering { pairs, radius, seed } => {
                let rho = radius.unwrap_or(0.25 * r);
                if !(rho > 0.0) {
                    return Err(ConformalError::InvalidParameter(format!("covering radius must be positive, got {rho}")));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut out = Vec::with_capacity(pairs);
                let mut guard = 0;
                while out.len() < pairs {
                    guard += 1;
                    if guard > 1000 * pairs.max(1) {
                        return Err(ConformalError::InvalidParameter("covering sampler found no pairs in Y".into()));
                    }
                    let u = unit(dim, &mut rng);
                    let depth = rng.random_range(0.0..rho);
                    let radial = match domain {
                        Domain::Ball { .. } => r - depth,
                        _ => r + depth,
                    };
                    let x = center + u * radial;
                    let y = x + unit(dim, &mut rng) * rng.random_range(0.0..rho);
                    if domain.signed_distance(&y) <= 0.0 && x.distance(&y) > 1e-3 * rho {
                        out.push((x, y));
                    }
                }
                Ok(out)
            }
        }
    }
}

fn frame(dim: usize, theta: f64, tilt: f64) -> (Point, Point) {
    if dim == 2 {
        (Point::xy(theta.cos(), theta.sin()), Point::xy(-theta.sin(), theta.cos()))
    } else {
        (
            Point::xyz(theta.cos(), theta.sin(), 0.0),
            Point::xyz(-theta.sin() * tilt.cos(), theta.cos() * tilt.cos(), tilt.sin()),
        )
    }
}

fn unit<R: Rng>(dim: usize, rng: &mut R) -> Point {
    loop {
        let mut p = Point::origin(dim);
        for i in 0..dim {
            p.set_coord(i, rng.sample::<f64, _>(rand_distr::StandardNormal));
        }
        let n = p.norm();
        if n > 1e-8 {
            return p * (1.0 / n);
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvexityParams {
    pub geodesic: GeodesicParams,
    /// Allowed `max V⁺` along a geodesic; `10⁻³·r` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

struct PairOutcome {
    vmax: f64,
    note: Option<String>,
}

fn max_violation(domain: &Domain, path: &Polyline) -> f64 {
    path.vertices().iter().map(|v| domain.signed_distance(v).max(0.0)).fold(0.0, f64::max)
}

/// Local geodesic convexity of `Y` in `(ℝⁿ, e^ψ ⊙ d)`: for every sampled pair the
/// `d′`-geodesic must stay in `Y` up to the tolerance.
pub fn check_local_convexity(
    domain: &Domain,
    psi: &ScalarField,
    sampler: &PairSampler,
    params: &ConvexityParams,
) -> Result<Report, ConformalError> {
    let started = Instant::now();
    psi.validate(domain.dim())?;
    let pairs = sampler.pairs(domain)?;
    let tol = params.tolerance.unwrap_or(1e-3 * domain.length_scale());
    let outcomes = map_paths(pairs.len(), |i| {
        let (x, y) = pairs[i as usize];
        match geodesic_with_info(psi, &x, &y, &params.geodesic) {
            Ok(g) => PairOutcome {
                vmax: max_violation(domain, &g.path),
                note: None,
            },
            Err(ConformalError::Convergence { iterations, residual, last }) => PairOutcome {
                vmax: max_violation(domain, &last),
                note: Some(format!("pair {i}: no convergence in {iterations} iterations (residual {residual:.2e})")),
            },
            Err(e) => PairOutcome {
                vmax: f64::NAN,
                note: Some(format!("pair {i}: {e}")),
            },
        }
    });
    let mut report = Report::new(
        "local_convexity",
        json!({ "domain": domain, "psi": psi, "sampler": sampler, "params": params, "tolerance": tol }),
    )
    .clock("no clock: purely metric check");
    let mut violations = 0;
    let mut worst = (0usize, 0.0f64);
    for (i, o) in outcomes.iter().enumerate() {
        report.compare(o.vmax, 0.0, 0.0, tol);
        if o.vmax > tol {
            violations += 1;
        }
        if o.vmax > worst.1 {
            worst = (i, o.vmax);
        }
        if let Some(n) = &o.note {
            report.poison(n.clone());
        }
    }
    report.diagnostic("pairs", pairs.len());
    report.diagnostic("violating_pairs", violations);
    report.diagnostic("worst_pair", json!({ "index": worst.0, "max_v_plus": worst.1 }));
    Ok(report.finish(started))
}
