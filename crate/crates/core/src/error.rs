use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input document. `line`/`column` are 1-based when known.
    #[error("parse error in {context} at line {line}, column {column}: {message}")]
    Parse {
        context: String,
        line: usize,
        column: usize,
        message: String,
    },

    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid configuration, transform, or parameter set.
    #[error("configuration error: {0}")]
    Config(String),

    /// Inputs that violate a documented invariant or shape contract.
    #[error("validation error: {0}")]
    Validation(String),

    /// Numerical failure (non-finite values, divergence).
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("{0}")]
    Encode(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(context: impl Into<String>, err: &serde_json::Error) -> Self {
        Error::Parse {
            context: context.into(),
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }

    /// Short machine-readable category used by the command line front end.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::Domain(_) => "domain",
            Error::Config(_) => "config",
            Error::Validation(_) => "validation",
            Error::Numerical(_) => "numerical",
            Error::Encode(_) => "encode",
        }
    }
}
