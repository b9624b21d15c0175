use serde::Serialize;
use thiserror::Error;

/// Failures surfaced by the command line, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Verification(String),
    #[error(transparent)]
    Numeric(mandel_core::Error),
    #[error("{0}")]
    Failed(String),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Verification(_) => 3,
            CliError::Numeric(_) | CliError::Failed(_) | CliError::Io { .. } => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Verification(_) => "verification",
            CliError::Numeric(_) | CliError::Failed(_) => "numeric",
            CliError::Io { .. } => "io",
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io { context: context.into(), source }
    }

    /// Machine-readable record written to stderr on failure.
    pub fn record(&self) -> ErrorRecord {
        ErrorRecord { error: ErrorBody { kind: self.kind(), exit_code: self.exit_code(), message: self.to_string() } }
    }
}

impl From<mandel_core::Error> for CliError {
    fn from(e: mandel_core::Error) -> Self {
        use mandel_core::Error as E;
        match e {
            E::InvalidInput(msg) => CliError::Config(msg),
            E::VariationalMismatch { .. } | E::ConstancyViolation { .. } | E::MatchingFailure(_) => {
                CliError::Verification(e.to_string())
            }
            other => CliError::Numeric(other),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub error: ErrorBody,
}

#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub kind: &'static str,
    pub exit_code: i32,
    pub message: String,
}

pub type CliResult<T> = std::result::Result<T, CliError>;
