use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not positive definite (failed pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("invalid `{field}`: {message}")]
    InvalidConfig { field: String, message: String },

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("cannot parse config: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad user input rather than a numerical or
    /// I/O failure during a run.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig { .. } | Error::Parse(_) | Error::Domain(_) | Error::DimensionMismatch { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
