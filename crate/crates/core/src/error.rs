use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the bidding/assignment pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate paper id \"{0}\"")]
    DuplicateId(String),

    #[error("missing file: {0}")]
    MissingFile(String),

    #[error("checksum mismatch for {file}: manifest has {expected}, file hashes to {actual}")]
    Checksum { file: String, expected: String, actual: String },

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("instance too large for exhaustive search: {0}")]
    InstanceTooLarge(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid sparse structure: {0}")]
    Sparse(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }

    /// True for configuration/argument problems (CLI exit code 2).
    pub fn is_param(&self) -> bool {
        match self {
            Error::Param(_) => true,
            Error::Stage { source, .. } => source.is_param(),
            _ => false,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage { stage, source: Box::new(self) }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
