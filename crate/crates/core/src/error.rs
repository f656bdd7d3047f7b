use std::path::PathBuf;

/// Errors raised anywhere in the extraction pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("point {index} has a non-finite coordinate")]
    NonFinitePoint { index: usize },

    #[error("matrix has non-finite entries")]
    NonFiniteMatrix,

    #[error("cluster is empty")]
    EmptyCluster,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: unknown point cloud format")]
    UnknownFormat { path: PathBuf },

    #[error("{path}: unsupported format version {found} (expected {expected})")]
    UnsupportedVersion {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    #[error("{path}: file truncated: {detail}")]
    Truncated { path: PathBuf, detail: String },

    #[error("{path}:{line}: {detail}")]
    Parse {
        path: PathBuf,
        line: usize,
        detail: String,
    },

    #[error("{path}:{line}: non-finite coordinate")]
    NonFiniteValue { path: PathBuf, line: usize },

    #[error("scene generation failed: {0}")]
    Generation(String),

    #[error("{path}: no such file")]
    NotFound { path: PathBuf },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse error classes, used for process exit codes and the C ABI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Input,
    Config,
    Io,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidConfig(_) => ErrorCategory::Config,
            Error::Io { .. } => ErrorCategory::Io,
            _ => ErrorCategory::Input,
        }
    }

    /// Like [`Error::io`], but a missing file is reported as bad input.
    pub(crate) fn read(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::NotFound { path: path.into() }
        } else {
            Error::io(path, source)
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
