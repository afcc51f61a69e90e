//! The line-oriented verification summary.

use std::fmt;
use std::str::FromStr;

use crate::config::Check;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// The check does not apply to this configuration.
    HypothesisUnverified,
}

impl Status {
    pub fn from_pass(pass: bool) -> Self {
        if pass {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::HypothesisUnverified => "hypothesis_unverified",
        }
    }
}

impl FromStr for Status {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pass" => Ok(Status::Pass),
            "fail" => Ok(Status::Fail),
            "hypothesis_unverified" => Ok(Status::HypothesisUnverified),
            other => Err(format!("unknown status `{other}`")),
        }
    }
}

/// Result of one requested check.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub check: Check,
    pub status: Status,
    pub value: f64,
    pub tol: f64,
    /// Further `key=value` pairs appended to the line.
    pub extras: Vec<(String, f64)>,
}

impl CheckOutcome {
    pub fn new(check: Check, status: Status, value: f64, tol: f64) -> Self {
        Self { check, status, value, tol, extras: Vec::new() }
    }

    pub fn with(mut self, key: impl Into<String>, value: f64) -> Self {
        self.extras.push((key.into(), value));
        self
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "check={} status={} value={:e} tol={:e}", self.check, self.status.name(), self.value, self.tol)?;
        for (k, v) in &self.extras {
            write!(f, " {k}={v:e}")?;
        }
        Ok(())
    }
}

/// Parses one summary line into `key=value` pairs, in order.
pub fn parse_line(line: &str) -> Result<Vec<(&str, &str)>, String> {
    line.split_whitespace()
        .map(|pair| pair.split_once('=').ok_or_else(|| format!("`{pair}` is not key=value")))
        .collect()
}

pub fn render(outcomes: &[CheckOutcome]) -> String {
    outcomes.iter().map(|o| format!("{o}\n")).collect()
}
