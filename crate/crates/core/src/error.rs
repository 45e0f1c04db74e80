use std::path::PathBuf;

use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no preset for environment `{environment}` variant `{variant}`")]
    UnknownPreset {
        environment: String,
        variant: String,
    },

    #[error("config syntax error: {0}")]
    ConfigSyntax(String),

    #[error("invalid config field `{field}`: {reason}")]
    ConfigInvalid { field: String, reason: String },

    #[error("no requirement row for {0}")]
    UnknownRequirement(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("TXRU mapping not realizable: {0}")]
    Mapping(String),

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("schema error at line {line}: {message}")]
    Schema { line: usize, message: String },

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::ConfigInvalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
