//! Configuration ingestion, command dispatch and report emission for the
//! `tikhlav` binary.

pub mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;

pub use commands::{run, Command, RunOptions, Source};
pub use config::{ExperimentSpec, RunConfig};
pub use report::{Check, RunReport};

pub const DEFAULT_TOL: f64 = 1e-8;

/// Exit status for a run whose checks did not all pass.
pub const EXIT_CHECK_FAILED: i32 = 5;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] tikhlav::Error),

    #[error("cannot write {path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use tikhlav::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 1,
            CliError::Core(e) => match e {
                E::InfeasibleSet
                | E::InfeasibleProblem { .. }
                | E::LambdaExceedsSlaterCap { .. }
                | E::NotASlaterPoint { .. } => 3,
                E::NonConvergence { .. } => 4,
                E::Output(_) => 1,
                _ => 2,
            },
        }
    }
}

const PRESETS: [(&str, &str); 3] = [
    (
        "interior-attainable-poisson-1d",
        include_str!("../presets/interior-attainable-poisson-1d.json"),
    ),
    (
        "clipped-fredholm-1d",
        include_str!("../presets/clipped-fredholm-1d.json"),
    ),
    (
        "binding-state-poisson-2d",
        include_str!("../presets/binding-state-poisson-2d.json"),
    ),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|p| p.0)
}

/// Text of a bundled configuration.
pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|p| p.0 == name).map(|p| p.1)
}
