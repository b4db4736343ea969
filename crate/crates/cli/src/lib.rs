//! Batch experiment runner for the `unigrad` learners: configuration, execution and CSV output.

use std::path::Path;

pub mod compare;
pub mod output;
pub mod runner;
pub mod settings;

pub use compare::compare;
pub use runner::{execute, run_seed, RunResult};
pub use settings::{Algo, EnvKind, RunConfig, Settings};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error(transparent)]
    Core(#[from] unigrad::Error),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    /// 2 for bad names or missing input, 3 for violated invariants, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::MissingInput(_) => 2,
            CliError::Core(unigrad::Error::InvalidInput(_)) => 2,
            CliError::Core(unigrad::Error::Contract(_)) => 3,
            CliError::Core(unigrad::Error::Numerical(_)) | CliError::Io { .. } => 1,
        }
    }
}
