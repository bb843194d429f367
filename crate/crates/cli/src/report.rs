use std::path::PathBuf;

use serde::Serialize;
use tikhlav::experiments::BoundCheck;

use crate::config::RunConfig;

/// One verification outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    pub(crate) fn from_bound(prefix: &str, b: &BoundCheck) -> Self {
        Self::new(
            format!("{prefix}/{}", b.label),
            b.passed,
            format!("{:.6e} <= {:.6e} at {:.3e}", b.lhs, b.rhs, b.parameter),
        )
    }

    /// `value` within `[lo, hi]`.
    pub(crate) fn within(name: impl Into<String>, value: Option<f64>, lo: f64, hi: f64) -> Self {
        match value {
            Some(v) => Self::new(name, v >= lo && v <= hi, format!("{v:.6} in [{lo}, {hi}]")),
            None => Self::new(name, false, "not enough points above the fit floor"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSummary {
    pub kind: String,
    /// serialized study outcome, records excluded (they go to `sweep.csv`)
    pub summary: serde_json::Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub version: String,
    pub config: RunConfig,
    pub tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub details: Option<serde_json::Value>,
    pub experiments: Vec<ExperimentSummary>,
    pub checks: Vec<Check>,
    pub files: Vec<PathBuf>,
    pub runtime_seconds: f64,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}
