use std::f64::consts::PI;
use web_time::Instant;

use serde_json::json;

use super::{finish, CheckOptions, VerifyError};
use crate::geometry::{Domain, Point, ScalarField};
use crate::report::Report;
use crate::semigroup::{Grid, GridSpec};

/// `C` in the allowance `C·(h/L)²`; 256 cells per length scale give ≈ 4.6·10⁻³.
pub const IBP_ALLOWANCE: f64 = 300.0;

struct Sides {
    gradient: f64,
    laplacian: f64,
    boundary: f64,
    h: f64,
}

impl Sides {
    fn residual(&self) -> f64 {
        (self.gradient + self.laplacian - self.boundary).abs()
    }
}

fn sides(domain: &Domain, f: &ScalarField, g: &ScalarField, cells: usize) -> Result<Sides, VerifyError> {
    let (grid, shift) = match domain {
        Domain::Interval { a, b } => (Grid::new(GridSpec::Interval { a: *a, b: *b, cells })?, Point::x(0.0)),
        Domain::Ball { center, radius } if center.dim() == 2 => (
            Grid::new(GridSpec::Disc {
                radius: *radius,
                radial: cells,
                angular: cells,
            })?,
            *center,
        ),
        other => {
            return Err(VerifyError::Unsupported(format!(
                "integration by parts runs on intervals and discs, not {other:?}"
            )))
        }
    };
    let (mut gradient, mut laplacian) = (0.0, 0.0);
    for (node, w) in grid.nodes().iter().zip(grid.weights()) {
        let x = *node + shift;
        let jf = f.jet(&x)?;
        let gv = g.value(&x);
        gradient += w * jf.grad.dot(&g.gradient(&x)?);
        laplacian += w * jf.lap * gv;
    }
    // ∫_∂Y Γ(f, V) g dσ with ∇V the outward unit normal
    let boundary = match domain {
        Domain::Interval { a, b } => {
            let at = |x: f64| -> Result<f64, VerifyError> {
                let p = Point::x(x);
                Ok(f.gradient(&p)?.coord(0) * g.value(&p))
            };
            at(*b)? - at(*a)?
        }
        Domain::Ball { center, radius } => {
            let n = cells;
            let mut acc = 0.0;
            for j in 0..n {
                let th = 2.0 * PI * j as f64 / n as f64;
                let normal = Point::xy(th.cos(), th.sin());
                let x = *center + normal * *radius;
                acc += f.gradient(&x)?.dot(&normal) * g.value(&x);
            }
            acc * 2.0 * PI * radius / n as f64
        }
        _ => unreachable!("rejected above"),
    };
    Ok(Sides {
        gradient,
        laplacian,
        boundary,
        h: grid.spacing(),
    })
}

/// `∫_Y Γ(f, g) + ∫_Y Δf·g = ∫_∂Y Γ(f, V)·g dσ` by grid quadrature inside and
/// the trapezoid rule on the boundary; the observed order comes from a second
/// run at half the resolution.
pub fn check_integration_by_parts(domain: &Domain, f: &ScalarField, g: &ScalarField, opts: &CheckOptions) -> Result<Report, VerifyError> {
    let started = Instant::now();
    f.validate(domain.dim())?;
    g.validate(domain.dim())?;
    let cells = opts.cells_or(256);
    if cells < 8 {
        return Err(VerifyError::InvalidParameter(format!("need at least 8 cells, got {cells}")));
    }
    let fine = sides(domain, f, g, cells)?;
    let coarse = sides(domain, f, g, cells / 2)?;
    let scale = domain.length_scale();
    let tol = opts.tolerance_scale * IBP_ALLOWANCE * (fine.h / scale).powi(2);
    let mut report = Report::new("integration_by_parts", json!({ "domain": domain, "f": f, "g": g, "cells": cells }))
        .clock("no clock: static identity");
    let residual = fine.residual();
    report.compare(residual, 0.0, 0.0, tol);
    let magnitude = fine.gradient.abs() + fine.laplacian.abs() + fine.boundary.abs();
    // below this the residual is rounding and carries no order information
    let order = if residual > 1e-12 * magnitude.max(1.0) {
        Some((coarse.residual() / residual).log2())
    } else {
        None
    };
    report.diagnostic("lhs", fine.gradient + fine.laplacian);
    report.diagnostic("rhs", fine.boundary);
    report.diagnostic("residual", residual);
    report.diagnostic("coarse_residual", coarse.residual());
    report.diagnostic("observed_order", order);
    Ok(finish(report, started))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Profile;
    use crate::report::Verdict;

    fn disc() -> Domain {
        Domain::ball(Point::xy(0.0, 0.0), 1.0).unwrap()
    }

    #[test]
    fn half_square_norm_on_the_unit_disc() {
        let f = ScalarField::Quadratic {
            center: Point::xy(0.0, 0.0),
            scale: 1.0,
        };
        let r = check_integration_by_parts(&disc(), &f, &ScalarField::constant(1.0), &CheckOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert!((r.diagnostics["lhs"].as_f64().unwrap() - 2.0 * PI).abs() < 1e-10);
        assert!((r.diagnostics["rhs"].as_f64().unwrap() - 2.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn trivial_cases() {
        let neumann = ScalarField::Radial {
            center: Point::xy(0.0, 0.0),
            profile: Profile::Cos {
                amplitude: 1.0,
                frequency: PI,
            },
        };
        let g = ScalarField::Linear {
            slope: Point::xy(0.3, -1.0),
            offset: 2.0,
        };
        let r = check_integration_by_parts(&disc(), &neumann, &g, &CheckOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(r.diagnostics["rhs"].as_f64().unwrap().abs() < 1e-12);
        let z = check_integration_by_parts(&disc(), &neumann, &ScalarField::zero(), &CheckOptions::default()).unwrap();
        assert_eq!(z.lhs[0], 0.0);
    }

    #[test]
    fn second_order_convergence() {
        let f = ScalarField::Axis {
            axis: 0,
            profile: Profile::Sin {
                amplitude: 1.0,
                frequency: 2.0,
                phase: 0.0,
            },
        };
        let g = ScalarField::Exp {
            field: Box::new(ScalarField::Linear {
                slope: Point::xy(0.5, 0.3),
                offset: 0.0,
            }),
        };
        let r = check_integration_by_parts(&disc(), &f, &g, &CheckOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(r.diagnostics["residual"].as_f64().unwrap() <= 5e-3);
        let order = r.diagnostics["observed_order"].as_f64().unwrap();
        assert!(order >= 1.9, "{order}");
        let g1 = ScalarField::Exp {
            field: Box::new(ScalarField::Linear {
                slope: Point::x(0.5),
                offset: 0.0,
            }),
        };
        let iv = Domain::interval(0.0, 2.0).unwrap();
        let r1 = check_integration_by_parts(&iv, &f, &g1, &CheckOptions::default()).unwrap();
        assert_eq!(r1.verdict, Verdict::Pass);
        assert!(r1.diagnostics["observed_order"].as_f64().unwrap() >= 1.9);
    }
}
