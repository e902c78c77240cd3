//! Browser bindings. Every export returns a JSON string; failures come back as
//! `{"error": "..."}` so the page has one code path.

use ricci_bounds::conformal::{convexification_weight, geodesic_with_info, GeodesicParams};
use ricci_bounds::geometry::{Domain, Point, ScalarField};
use ricci_bounds::stochastic::McParams;
use ricci_bounds::verify::{check_ball_decay, check_spectral_gap, BallDecayParams, CheckOptions};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn respond(r: Result<Value, String>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

fn weight(name: &str) -> Result<ScalarField, String> {
    let origin = Point::xy(0.0, 0.0);
    match name {
        "flat" => Ok(ScalarField::zero()),
        "log-annulus" => Ok(ScalarField::LogRadial {
            center: origin,
            radius: 1.0,
        }),
        "convexification" => {
            let d = Domain::ball_complement(origin, 1.0).map_err(|e| e.to_string())?;
            convexification_weight(&d, &ScalarField::constant(-1.0), 0.05).map_err(|e| e.to_string())
        }
        other => Err(format!("unknown weight {other:?}")),
    }
}

/// Conformal geodesic for `e^ψ ⊙ d` between two points of the plane. The unit
/// circle is the reference curve for the radial deviation.
#[wasm_bindgen]
pub fn geodesic(psi: &str, x0: f64, y0: f64, x1: f64, y1: f64, segments: usize) -> String {
    respond((|| {
        let psi = weight(psi)?;
        let g = geodesic_with_info(
            &psi,
            &Point::xy(x0, y0),
            &Point::xy(x1, y1),
            &GeodesicParams::with_segments(segments.clamp(4, 512)),
        )
        .map_err(|e| e.to_string())?;
        let v = g.path.vertices();
        Ok(json!({
            "vertices": v.iter().map(|p| [p.coord(0), p.coord(1)]).collect::<Vec<_>>(),
            "length": g.length,
            "initial_length": g.initial_length,
            "iterations": g.iterations,
            "max_radial_deviation": v.iter().map(|p| (p.norm() - 1.0).abs()).fold(0.0, f64::max),
        }))
    })())
}

/// Neumann `λ₁` of a disc on a polar grid against `½cot²r` and the Bessel value.
#[wasm_bindgen]
pub fn spectral_gap(radius: f64, cells: usize) -> String {
    respond((|| {
        let opts = CheckOptions {
            cells: Some(cells.clamp(8, 96)),
            ..Default::default()
        };
        let r = check_spectral_gap(radius, 2, &opts).map_err(|e| e.to_string())?;
        serde_json::to_value(r).map_err(|e| e.to_string())
    })())
}

/// Monte-Carlo moments `E[e^{−cot r·L_t}]` in the disc of radius `r`, with
/// `cot_scale = 0` as the control.
#[wasm_bindgen]
pub fn ball_decay(radius: f64, t: f64, paths: usize, seed: u64, cot_scale: f64) -> String {
    respond((|| {
        let params = BallDecayParams {
            cot_scale,
            ..BallDecayParams::new(radius, 2, t)
        };
        let mc = McParams::new(paths.clamp(100, 20_000), 2e-3);
        let r = check_ball_decay(&params, &mc, &CheckOptions::seeded(seed)).map_err(|e| e.to_string())?;
        serde_json::to_value(r).map_err(|e| e.to_string())
    })())
}
