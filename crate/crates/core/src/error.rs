use std::fmt;

use thiserror::Error;

/// A physical parameter that failed validation.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{field}: {message}")]
pub struct ParamError {
    pub field: String,
    pub message: String,
}

impl ParamError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Prefixes the field path, e.g. `soil` + `density` -> `soil.density`.
    pub fn within(mut self, parent: &str) -> Self {
        self.field = if self.field.starts_with('[') {
            format!("{parent}{}", self.field)
        } else {
            format!("{parent}.{}", self.field)
        };
        self
    }
}

/// All validation problems found in one scenario.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ValidationErrors(pub Vec<ParamError>);

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} validation error(s):", self.0.len())?;
        for e in &self.0 {
            writeln!(f, "  {e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Validation(#[from] ValidationErrors),
    #[error("{0}")]
    Param(#[from] ParamError),
    #[error("failed to parse {path}: {message}")]
    Parse { path: String, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error in {path}: {message}")]
    Csv { path: String, message: String },
    #[error("non-finite derivative for `{slot}` at t = {t} s")]
    NonFinite { slot: String, t: f64 },
    #[error("adaptive step size underflow at t = {t} s (worst component `{slot}`)")]
    StepUnderflow { slot: String, t: f64 },
    #[error("metrics: {0}")]
    Metrics(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
