use std::io;
use std::path::PathBuf;

use stableq_core::Error as CoreError;

/// Process exit codes of the `stableq` binary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ExitCode {
    Ok = 0,
    Invariant = 1,
    Usage = 2,
    Io = 3,
    Budget = 4,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("{path}: invalid map, failed checks: {}", failed.join(", "))]
    InvalidMap { path: PathBuf, failed: Vec<String> },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Io { .. } | CliError::Parse { .. } | CliError::Csv(_) | CliError::Json(_) => ExitCode::Io,
            CliError::InvalidMap { .. } => ExitCode::Invariant,
            CliError::Usage(_) => ExitCode::Usage,
            CliError::Core(e) => match e {
                CoreError::SamplingBudget { .. } => ExitCode::Budget,
                CoreError::Domain(_) | CoreError::Config(_) | CoreError::OutOfRange { .. } => ExitCode::Usage,
                _ => ExitCode::Invariant,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
