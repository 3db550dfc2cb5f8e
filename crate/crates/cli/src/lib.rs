//! Experiment runner: tuning runs, uncertainty sweeps with L1 ablation,
//! fixed-gain evaluation, gradient checks and rollout dumps, all driven by
//! one TOML config per experiment.

pub mod config;
pub mod output;
pub mod run;

use std::path::Path;

pub use config::{ConfigError, ExperimentConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("diverged: {0}")]
    Diverged(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Other(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Diverged(_) => 3,
            CliError::Other(_) => 1,
        }
    }
}
