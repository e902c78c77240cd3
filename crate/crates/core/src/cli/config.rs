use std::path::PathBuf;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::geometry::{Bump, Domain, Point, ScalarField};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Run configuration as read from a TOML file. Every key is optional; command-line
/// flags override file values.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub paths: Option<usize>,
    pub dt: Option<f64>,
    pub grid: Option<usize>,
    pub tolerance_scale: Option<f64>,
    /// Horizon: path clock for `simulate`, semigroup time for `heat`, flow time for `flow`.
    pub t: Option<f64>,
    pub from: Option<Point>,
    pub to: Option<Point>,
    pub domain: Option<Domain>,
    pub k: Option<ScalarField>,
    pub ell: Option<ScalarField>,
    pub psi: Option<ScalarField>,
    pub f: Option<ScalarField>,
    pub level: Option<u32>,
    pub bump: Option<Bump>,
    pub checks: Option<Vec<String>>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

pub const SCHEMA: &str = r#"ricci-bounds run configuration (TOML). All keys optional; flags win.

seed            = <u64>                master seed; every random stream derives from it
threads         = <usize>              worker threads (also RICCI_THREADS)
out             = "<dir>"              directory for artifacts
format          = "csv" | "json"       stdout format
paths           = <usize>              Monte-Carlo paths
dt              = <f64>                Euler step in the path clock (generator ½Δ)
grid            = <usize>              grid cells, or geodesic segments
tolerance_scale = <f64>                multiplies deterministic allowances
t               = <f64>                horizon of simulate/heat/flow
from            = [<f64>, ...]         start point
to              = [<f64>, ...]         end point (geodesic, flow)
level           = <u32>                cantor level, 0..=12
bump            = "cos-squared" | "polynomial"
checks          = ["<id>", ...]        verify targets; "all" runs the suite

[domain]        kind = "interval"         a, b
                kind = "box"              lo = [..], hi = [..]
                kind = "ball"             center = [..], radius
                kind = "ball-complement"  center = [..], radius
                kind = "half-space"       dim, axis, level

[k] [ell] [psi] [f]   scalar fields, tagged by kind:
                constant { value }            linear { slope, offset }
                quadratic { center, scale }   axis { axis, profile }
                radial { center, profile }    log-radial { center, radius }
                signed-distance { domain }    comparison-potential { radius, center, curvature }
                dipole { center, radius }     convexification-weight { domain, ell, eps }
                scaled { factor, field }      sum { terms }   product { factors }   exp { field }
  profiles, tagged by kind:
                poly { coeffs }   sin { amplitude, frequency, phase }   cos { amplitude, frequency }
                gaussian { amplitude, width }   bump { bump }   eta   cantor { level, bump }

Example:
  seed = 42
  paths = 20000
  [domain]
  kind = "ball"
  center = [0.0, 0.0]
  radius = 0.5
  [f]
  kind = "linear"
  slope = [1.0, 0.0]
"#;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_example_parses() {
        let example = SCHEMA.split("Example:\n").nth(1).unwrap();
        let text: String = example.lines().map(|l| l.trim_start().to_string() + "\n").collect();
        let c = RunConfig::from_toml(&text).unwrap();
        assert_eq!(c.seed, Some(42));
        assert!(matches!(c.domain, Some(Domain::Ball { .. })));
        assert!(matches!(c.f, Some(ScalarField::Linear { .. })));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("sed = 3").is_err());
        assert!(RunConfig::from_toml("[domain]\nkind = \"ball\"\ncenter = [0.0]\nradius = 1.0\nextra = 1").is_err());
        assert!(RunConfig::from_toml("format = \"xml\"").is_err());
    }
}
