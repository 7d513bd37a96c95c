use serde::Serialize;
use thiserror::Error;

use crate::system::Violation;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("system failed validation: {}", format_violations(.0))]
    Validation(Vec<Violation>),

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("ensemble needs {requested} stored values, limit is {limit}")]
    Capacity { requested: usize, limit: usize },

    #[error("no tipping point: the expectation map is {0}, not unstable")]
    NoTippingPoint(String),

    #[error("direction cannot reach the separatrix: {0}")]
    Unreachable(String),

    #[error("parameter path `{0}` does not resolve")]
    PathNotFound(String),

    #[error("inadmissible value for `{path}`: {reason}")]
    Inadmissible { path: String, reason: String },

    #[error("regime violation: requires {0}")]
    RegimeViolation(String),

    #[error("invalid scenario: {}", format_fields(.0))]
    Scenario(Vec<FieldError>),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// A problem located at a field path inside a scenario document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl FieldError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { path: path.into(), message: message.into() }
    }
}

impl std::fmt::Display for FieldError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "field \"{}\": {}", self.path, self.message)
    }
}

fn format_fields(fs: &[FieldError]) -> String {
    fs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;

fn format_violations(vs: &[Violation]) -> String {
    vs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

pub(crate) fn ensure_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be finite, got {x}")))
    }
}
