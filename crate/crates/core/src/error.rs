use std::io;
use std::path::PathBuf;

/// Errors produced by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Stream(#[from] io::Error),

    #[error("parallel files are not aligned: source has {source_lines} lines, target has {target_lines}")]
    AlignmentMismatch {
        source_lines: usize,
        target_lines: usize,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("training failed: {0}")]
    Training(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    /// Short machine-readable category name.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Io { .. } | Error::Stream(_) => "io",
            Error::AlignmentMismatch { .. } => "alignment-mismatch",
            Error::Parse { .. } => "parse",
            Error::Training(_) => "training",
            Error::Parameter(_) => "parameter",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
