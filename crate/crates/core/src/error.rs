use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    /// Sequence length the construction cannot produce.
    #[error("unsupported sequence length {0}: must be a power of two")]
    UnsupportedLength(usize),

    /// A structural constraint between parameters is violated.
    #[error("constraint violation: {0}")]
    Constraint(String),

    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Index outside the valid range.
    #[error("index {index} out of range (limit {limit})")]
    Index { index: usize, limit: usize },

    /// Vector lengths that must agree do not.
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    /// Invalid or inconsistent configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Root bracketing or iteration failed.
    #[error("solver error: {0}")]
    Solver(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("TOML error: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable tag for the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::UnsupportedLength(_) => "unsupported_length",
            Error::Constraint(_) => "constraint",
            Error::Domain(_) => "domain",
            Error::Index { .. } => "index",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::Config(_) => "config",
            Error::Solver(_) => "solver",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Toml(_) => "toml",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
