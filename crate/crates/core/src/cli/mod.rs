//! Command-line runner: `ricci-bounds <command> [flags]`.
//!
//! Exit codes: 0 when every verdict is PASS, 2 when any is INCONCLUSIVE, 1 on
//! any FAIL or error. Errors are printed to stderr as one JSON object.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

pub use config::{Format, RunConfig, SCHEMA};

use crate::conformal::ConformalError;
use crate::geometry::{Bump, Domain, GeometryError, Point, ScalarField};
use crate::report::Verdict;
use crate::semigroup::SemigroupError;
use crate::stochastic::StochasticError;
use crate::verify::VerifyError;

#[derive(Debug, Parser)]
#[command(name = "ricci-bounds", version, about = "Ricci lower bounds for Neumann heat flows: simulation and checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,
    #[command(flatten)]
    pub global: Global,
}

#[derive(Debug, Default, Clone, Args)]
pub struct Global {
    /// TOML run configuration
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, env = "RICCI_THREADS")]
    pub threads: Option<usize>,
    /// Directory for artifacts (CSV traces, full JSON reports)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[arg(long, global = true)]
    pub paths: Option<usize>,
    /// Euler step in the path clock
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Grid cells (or geodesic segments)
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    #[arg(long, global = true)]
    pub tolerance_scale: Option<f64>,
    /// Validate the configuration and print it without computing
    #[arg(long, global = true)]
    pub dry_run: bool,
    /// Print the configuration schema and exit
    #[arg(long)]
    pub print_schema: bool,
    /// interval | disc | ball | box | complement | halfspace
    #[arg(long, global = true)]
    pub domain: Option<String>,
    #[arg(long, global = true)]
    pub radius: Option<f64>,
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    /// Horizon of simulate/heat/flow
    #[arg(long, global = true)]
    pub t: Option<f64>,
    /// Comma-separated coordinates, e.g. 1,0
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub from: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub to: Option<String>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Reflected Brownian paths: local-time statistics and one trace
    Simulate,
    /// Conformal geodesic between --from and --to
    Geodesic {
        /// flat | log-annulus | convexification | cantor
        #[arg(long)]
        psi: Option<String>,
    },
    /// Gradient flows of a potential and their EVI contraction
    Flow {
        /// quadratic | quartic
        #[arg(long, default_value = "quadratic")]
        potential: String,
    },
    /// Neumann heat flow and its gradient decay curve
    Heat,
    /// First nonzero Neumann eigenvalue
    Spectrum,
    /// Run named checks, or the whole suite with `all`
    Verify {
        ids: Vec<String>,
        /// List the check ids and exit
        #[arg(long)]
        list: bool,
    },
    /// Cantor weight bounds and profile
    Cantor {
        #[arg(long)]
        level: Option<u32>,
        #[arg(long, value_parser = parse_bump)]
        bump: Option<Bump>,
        /// Also run the two-dimensional gradient scenario
        #[arg(long)]
        scenario: bool,
    },
}

fn parse_bump(s: &str) -> Result<Bump, String> {
    match s {
        "cos-squared" | "cos2" => Ok(Bump::CosSquared),
        "polynomial" | "poly" => Ok(Bump::Polynomial),
        other => Err(format!("unknown bump {other:?} (cos-squared | polynomial)")),
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Stochastic(#[from] StochasticError),
    #[error(transparent)]
    Conformal(#[from] ConformalError),
    #[error(transparent)]
    Semigroup(#[from] SemigroupError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Verify(_) => "verify",
            CliError::Stochastic(_) => "stochastic",
            CliError::Conformal(_) => "conformal",
            CliError::Semigroup(_) => "semigroup",
            CliError::Geometry(_) => "geometry",
        }
    }
}

/// Configuration after merging file and flags.
#[derive(Clone, Debug, Serialize)]
pub struct Settings {
    pub seed: u64,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    /// Unset means the command's own default (JSON for `spectrum`, CSV elsewhere).
    pub format: Option<Format>,
    pub paths: Option<usize>,
    pub dt: Option<f64>,
    pub grid: Option<usize>,
    pub tolerance_scale: f64,
    pub t: Option<f64>,
    pub from: Option<Point>,
    pub to: Option<Point>,
    pub domain: Option<Domain>,
    pub radius: Option<f64>,
    pub k: Option<ScalarField>,
    pub ell: Option<ScalarField>,
    pub psi: Option<ScalarField>,
    pub f: Option<ScalarField>,
    pub level: Option<u32>,
    pub bump: Option<Bump>,
    pub checks: Option<Vec<String>>,
}

fn parse_point(s: &str) -> Result<Point, CliError> {
    let coords: Result<Vec<f64>, _> = s.split(',').map(|c| c.trim().parse::<f64>()).collect();
    let coords = coords.map_err(|e| CliError::Config(format!("bad point {s:?}: {e}")))?;
    Ok(Point::new(&coords)?)
}

fn domain_from_flag(name: &str, radius: Option<f64>, dim: Option<usize>) -> Result<Domain, CliError> {
    let r = radius.unwrap_or(1.0);
    Ok(match name {
        "interval" => Domain::interval(0.0, radius.unwrap_or(std::f64::consts::PI))?,
        "disc" => Domain::ball(Point::origin(2), r)?,
        "ball" => Domain::ball(Point::origin(dim.unwrap_or(2)), r)?,
        "complement" | "ball-complement" => Domain::ball_complement(Point::origin(dim.unwrap_or(3)), r)?,
        "halfspace" | "half-space" => {
            let d = dim.unwrap_or(2).max(1);
            Domain::half_space(d, d - 1, 0.0)?
        }
        "box" => Domain::cuboid(Point::origin(2), Point::xy(r, r))?,
        other => {
            return Err(CliError::Config(format!(
                "unknown domain {other:?} (interval | disc | ball | box | complement | halfspace)"
            )))
        }
    })
}

impl Settings {
    pub fn resolve(file: RunConfig, g: &Global) -> Result<Settings, CliError> {
        let domain = match &g.domain {
            Some(name) => Some(domain_from_flag(name, g.radius, g.dim)?),
            None => file.domain,
        };
        if let Some(d) = &domain {
            d.validate()?;
        }
        let from = match &g.from {
            Some(s) => Some(parse_point(s)?),
            None => file.from,
        };
        let to = match &g.to {
            Some(s) => Some(parse_point(s)?),
            None => file.to,
        };
        let s = Settings {
            seed: g.seed.or(file.seed).unwrap_or(0),
            threads: g.threads.or(file.threads),
            out: g.out.clone().or(file.out),
            format: g.format.or(file.format),
            paths: g.paths.or(file.paths),
            dt: g.dt.or(file.dt),
            grid: g.grid.or(file.grid),
            tolerance_scale: g.tolerance_scale.or(file.tolerance_scale).unwrap_or(1.0),
            t: g.t.or(file.t),
            from,
            to,
            domain,
            radius: g.radius,
            k: file.k,
            ell: file.ell,
            psi: file.psi,
            f: file.f,
            level: file.level,
            bump: file.bump,
            checks: file.checks,
        };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.threads == Some(0) {
            return bad("threads must be at least 1".into());
        }
        if self.paths == Some(0) {
            return bad("paths must be at least 1".into());
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return bad(format!("dt must be positive, got {dt}"));
            }
        }
        if let Some(t) = self.t {
            if !(t >= 0.0 && t.is_finite()) {
                return bad(format!("t must be ≥ 0, got {t}"));
            }
        }
        if !(self.tolerance_scale >= 0.0 && self.tolerance_scale.is_finite()) {
            return bad(format!("tolerance_scale must be ≥ 0, got {}", self.tolerance_scale));
        }
        if let (Some(a), Some(b)) = (&self.from, &self.to) {
            if a.dim() != b.dim() {
                return bad("from and to differ in dimension".into());
            }
        }
        let dim = self.domain.as_ref().map(|d| d.dim()).or(self.from.map(|p| p.dim()));
        if let Some(dim) = dim {
            for field in [&self.k, &self.ell, &self.psi, &self.f].into_iter().flatten() {
                field.validate(dim)?;
            }
        }
        Ok(())
    }
}

/// What a command produced: text for stdout, artifacts for `--out`, and the
/// verdict driving the exit code (none for pure computations).
pub struct Output {
    pub stdout: String,
    pub files: Vec<(String, String)>,
    pub verdict: Option<Verdict>,
}

fn init_threads(n: Option<usize>) {
    #[cfg(feature = "parallel")]
    if let Some(n) = n {
        // a second initialisation in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
}

/// Parses arguments, runs, prints, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(out) => {
            print!("{}", out.stdout);
            out.verdict.map_or(0, Verdict::exit_code)
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": { "kind": e.kind(), "message": e.to_string() } }));
            1
        }
    }
}

pub fn main() -> i32 {
    main_with_args(std::env::args_os())
}

pub fn run(cli: &Cli) -> Result<Output, CliError> {
    if cli.global.print_schema {
        return Ok(Output {
            stdout: SCHEMA.to_string(),
            files: Vec::new(),
            verdict: None,
        });
    }
    let command = cli
        .command
        .clone()
        .ok_or_else(|| CliError::Config("no command given; see --help".into()))?;
    let file = match &cli.global.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            RunConfig::from_toml(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    let settings = Settings::resolve(file, &cli.global)?;
    if cli.global.dry_run {
        let resolved = json!({ "command": format!("{command:?}"), "settings": settings, "status": "valid" });
        return Ok(Output {
            stdout: serde_json::to_string_pretty(&resolved).expect("settings serialize") + "\n",
            files: Vec::new(),
            verdict: None,
        });
    }
    init_threads(settings.threads);
    let out = commands::dispatch(&command, &settings)?;
    if let Some(dir) = &settings.out {
        std::fs::create_dir_all(dir)?;
        for (name, body) in &out.files {
            std::fs::write(dir.join(name), body)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("ricci-bounds").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_override_the_file() {
        let cli = parse(&["simulate", "--seed", "7", "--domain", "disc", "--radius", "0.5"]);
        let file = RunConfig::from_toml("seed = 3\npaths = 11").unwrap();
        let s = Settings::resolve(file, &cli.global).unwrap();
        assert_eq!(s.seed, 7);
        assert_eq!(s.paths, Some(11));
        assert_eq!(s.domain, Some(Domain::ball(Point::origin(2), 0.5).unwrap()));
    }

    #[test]
    fn points_and_errors() {
        assert_eq!(parse_point("1, -0.5").unwrap(), Point::xy(1.0, -0.5));
        assert!(parse_point("1,a").is_err());
        let cli = parse(&["heat", "--dt=-1"]);
        assert!(Settings::resolve(RunConfig::default(), &cli.global).is_err());
        let cli = parse(&["simulate", "--domain", "moon"]);
        assert!(Settings::resolve(RunConfig::default(), &cli.global).is_err());
    }

    #[test]
    fn dry_run_and_schema_do_not_compute() {
        let out = run(&parse(&["verify", "all", "--dry-run"])).unwrap();
        assert!(out.stdout.contains("\"status\": \"valid\""));
        assert!(out.verdict.is_none());
        let schema = run(&parse(&["--print-schema"])).unwrap();
        assert!(schema.stdout.contains("[domain]"));
    }
}
