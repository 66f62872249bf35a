//! CLI error taxonomy mapped onto exit codes:
//! 2 validation, 3 numerical failure, 4 failed acceptance-tagged check.

use sphereflow_core::CoreError;
use std::fmt;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
    CheckFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::CheckFailed(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::CheckFailed(m) => write!(f, "check failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::DimensionMismatch { .. }
            | CoreError::InvalidArgument(_)
            | CoreError::ParameterRange(_)
            | CoreError::UnsupportedDimension(_)
            | CoreError::Parse { .. } => CliError::Validation(e.to_string()),
            CoreError::CutLocus { .. }
            | CoreError::ZeroDistance
            | CoreError::NotPositiveSemidefinite { .. }
            | CoreError::EntropyUndefined { .. }
            | CoreError::Instability { .. }
            | CoreError::NonFinite(_)
            | CoreError::Io(_) => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Numerical(format!("io error: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
