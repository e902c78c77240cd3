//! Structured verification results shared by every check.

use std::fmt;
use web_time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// Outcome of a check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Inconclusive,
    Fail,
}

impl Verdict {
    /// Verdict of one comparison with slack `s = bound − value`, standard error
    /// `se` and deterministic allowance `tol`:
    /// PASS if `s ≥ −tol`, FAIL if `s < −tol − 3·se`, otherwise INCONCLUSIVE
    /// (the confidence interval straddles the tolerance band).
    pub fn from_slack(slack: f64, se: f64, tol: f64) -> Verdict {
        if !slack.is_finite() {
            Verdict::Inconclusive
        } else if slack >= -tol {
            Verdict::Pass
        } else if slack >= -tol - 3.0 * se {
            Verdict::Inconclusive
        } else {
            Verdict::Fail
        }
    }

    /// Worst of two verdicts (FAIL dominates INCONCLUSIVE dominates PASS).
    pub fn and(self, other: Verdict) -> Verdict {
        self.max(other)
    }

    /// Process exit code: 0 for PASS, 2 for INCONCLUSIVE, 1 for FAIL.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::Inconclusive => 2,
            Verdict::Fail => 1,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Inconclusive => "INCONCLUSIVE",
            Verdict::Fail => "FAIL",
        })
    }
}

/// One verification result. `slack = rhs − lhs` per probe, so a claim of the
/// form `lhs ≤ rhs` holds where the slack is nonnegative.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub check: String,
    pub params: Value,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub se: Vec<f64>,
    pub slack: Vec<f64>,
    pub verdict: Verdict,
    pub clock_note: String,
    pub runtime_s: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tolerance: Vec<f64>,
    #[serde(default, skip_serializing_if = "Map::is_empty")]
    pub diagnostics: Map<String, Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl Report {
    pub fn new(check: impl Into<String>, params: Value) -> Self {
        Report {
            check: check.into(),
            params,
            lhs: Vec::new(),
            rhs: Vec::new(),
            se: Vec::new(),
            slack: Vec::new(),
            verdict: Verdict::Pass,
            clock_note: String::new(),
            runtime_s: 0.0,
            tolerance: Vec::new(),
            diagnostics: Map::new(),
            warnings: Vec::new(),
        }
    }

    pub fn clock(mut self, note: impl Into<String>) -> Self {
        self.clock_note = note.into();
        self
    }

    /// Appends one `lhs ≤ rhs` comparison and folds its verdict in.
    pub fn compare(&mut self, lhs: f64, rhs: f64, se: f64, tol: f64) -> Verdict {
        let slack = rhs - lhs;
        let v = Verdict::from_slack(slack, se, tol);
        self.lhs.push(lhs);
        self.rhs.push(rhs);
        self.se.push(se);
        self.slack.push(slack);
        self.tolerance.push(tol);
        self.verdict = self.verdict.and(v);
        v
    }

    pub fn diagnostic(&mut self, key: &str, value: impl Serialize) {
        self.diagnostics
            .insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
    }

    /// Forces the verdict to at least INCONCLUSIVE.
    pub fn poison(&mut self, reason: impl Into<String>) {
        self.warn(reason);
        self.verdict = self.verdict.and(Verdict::Inconclusive);
    }

    pub fn min_slack(&self) -> f64 {
        self.slack.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn finish(mut self, started: Instant) -> Self {
        self.runtime_s = started.elapsed().as_secs_f64();
        self
    }
}
