//! Process-level error type carrying the fixed exit-code map:
//! `0` success, `2` malformed input, `3` non-convergence, `4` blow-up
//! guard, `5` resolution limits, `1` anything else (IO, internal).

use mfe_degree::DegreeError;
use mfe_torus::TorusError;

/// An error ready to be reported and turned into a process exit code.
#[derive(Debug)]
pub struct AppError {
    /// Process exit code.
    pub code: i32,
    /// Human-readable message for standard error.
    pub message: String,
}

impl AppError {
    /// Malformed input: exit code 2.
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    /// Internal/environment failure: exit code 1.
    pub fn internal(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<TorusError> for AppError {
    fn from(err: TorusError) -> Self {
        let code = match &err {
            TorusError::NonConvergence { .. } => 3,
            TorusError::BlowUp { .. } => 4,
            TorusError::ResolutionLimit { .. } | TorusError::DenseSizeLimit { .. } => 5,
            TorusError::Io(_) => 1,
            _ => 2,
        };
        Self {
            code,
            message: err.to_string(),
        }
    }
}

impl From<DegreeError> for AppError {
    fn from(err: DegreeError) -> Self {
        Self {
            code: 2,
            message: err.to_string(),
        }
    }
}

impl From<std::io::Error> for AppError {
    fn from(err: std::io::Error) -> Self {
        Self {
            code: 1,
            message: err.to_string(),
        }
    }
}

impl From<serde_json::Error> for AppError {
    fn from(err: serde_json::Error) -> Self {
        Self {
            code: 2,
            message: format!("malformed JSON: {err}"),
        }
    }
}
