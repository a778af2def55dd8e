//! Configuration, scenario runners and run reports behind the `stosszahl`
//! command-line tool.

pub mod config;
pub mod report;
pub mod scenarios;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{ConfigError, ScenarioConfig};
pub use report::{Check, RunReport};
pub use scenarios::{run_scenario, SCENARIOS};

/// Overrides the output directory named in a config file.
pub const OUTPUT_DIR_ENV: &str = "STOSSZAHL_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "stosszahl-out";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] stosszahl_core::Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl RunError {
    /// 2 for bad input, 1 for anything that went wrong while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            _ => 1,
        }
    }
}

/// Precedence: explicit flag, then environment, then config, then default.
pub fn resolve_output_dir(flag: Option<&Path>, env: Option<&str>, config: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| env.filter(|s| !s.is_empty()).map(PathBuf::from))
        .or_else(|| config.map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}
