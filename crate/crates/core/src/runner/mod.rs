//! Scenario configuration, orchestration of oracle/solver/analysis passes,
//! refinement sweeps, and report bundles.

mod config;
mod pipeline;
mod replay;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{
    parse_config, parse_config_unchecked, scheme_for, Analysis, CommutatorExpectation, ExponentSpec, FieldName,
    GridSpec, HardyExpectation, InitialSpec, Scenario, SolverSpec, Source, TestFunctionSpec, Theorem, TheoremVerdict,
    Tolerances, VelocitySpec,
};
pub use pipeline::{
    commutator_only, convergence_study, run_scenario, run_scenario_with, verify_hypotheses, ConvergenceRow,
    HypothesisReport, RunOptions, Trajectories,
};
pub use replay::{time_shift_replay, ReplayReport, ReplaySegment};

/// A configuration problem, with the key path or line where it was found.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{location}: {message}")]
pub struct ConfigError {
    pub location: String,
    pub message: String,
}

impl ConfigError {
    pub fn at(location: impl Into<String>, message: impl Into<String>) -> Self {
        Self { location: location.into(), message: message.into() }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// A solver aborted; whatever was produced before is kept in `partial`.
    #[error("{message}")]
    Aborted { message: String, partial: Box<Bundle> },
    #[error("{0}")]
    Analysis(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e.to_string())
    }
}

/// One pass/fail line of a summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Criterion {
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, pass: value <= tolerance }
    }

    pub fn at_least(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, pass: value >= tolerance }
    }

    pub fn flag(name: impl Into<String>, pass: bool) -> Self {
        Self { name: name.into(), value: if pass { 1.0 } else { 0.0 }, tolerance: 1.0, pass }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub criteria: Vec<Criterion>,
}

impl Summary {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes") + "\n"
    }

    /// Fixed-width table for terminals.
    pub fn render(&self) -> String {
        let mut s = format!("scenario: {}\n", self.scenario);
        let w = self.criteria.iter().map(|c| c.name.len()).max().unwrap_or(0);
        for c in &self.criteria {
            s.push_str(&format!(
                "  {} {:<w$}  value {:>12.5e}  tolerance {:>12.5e}\n",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.tolerance
            ));
        }
        s.push_str(if self.passed() { "all criteria passed\n" } else { "some criteria FAILED\n" });
        s
    }
}

/// Output files keyed by relative path, plus the summary.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Bundle {
    pub summary: Option<Summary>,
    pub files: BTreeMap<String, Vec<u8>>,
}

impl Bundle {
    pub fn add(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.files.insert(name.into(), bytes.into());
    }

    /// Writes every file and `summary.json` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), RunError> {
        std::fs::create_dir_all(dir)?;
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, bytes)?;
        }
        if let Some(s) = &self.summary {
            std::fs::write(dir.join("summary.json"), s.to_json())?;
        }
        Ok(())
    }
}

/// Reads `summary.json` from a bundle directory.
pub fn read_summary(dir: &Path) -> Result<Summary, RunError> {
    let text = std::fs::read_to_string(dir.join("summary.json"))?;
    serde_json::from_str(&text).map_err(|e| RunError::Io(format!("summary.json: {e}")))
}
