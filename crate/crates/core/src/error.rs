use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = AuditError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("{what} out of range: {value}")]
    Range { what: &'static str, value: String },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("{path}: row {row}: {message}")]
    Parse {
        path: String,
        row: usize,
        message: String,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("empty scope: {0}")]
    EmptyScope(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl AuditError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AuditError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(
        path: impl std::fmt::Display,
        row: usize,
        message: impl Into<String>,
    ) -> Self {
        AuditError::Parse {
            path: path.to_string(),
            row,
            message: message.into(),
        }
    }

    /// Coarse category used by the CLI to pick an exit code.
    pub fn kind(&self) -> ErrorKind {
        match self {
            AuditError::Config(_) => ErrorKind::Config,
            AuditError::Range { .. }
            | AuditError::Integrity(_)
            | AuditError::Parse { .. }
            | AuditError::Format(_)
            | AuditError::Io { .. }
            | AuditError::Serde(_)
            | AuditError::Csv(_) => ErrorKind::Input,
            AuditError::InsufficientData(_)
            | AuditError::Shape(_)
            | AuditError::Infeasible(_)
            | AuditError::Undefined(_)
            | AuditError::EmptyScope(_) => ErrorKind::Analysis,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Input,
    Analysis,
}
