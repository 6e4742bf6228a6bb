use std::path::PathBuf;

use crate::config::Violation;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] smt_core::Error),

    #[error("{}: {source}", path.display())]
    InFile {
        path: PathBuf,
        #[source]
        source: smt_core::Error,
    },

    #[error("invalid configuration: {}", join(.0))]
    Config(Vec<Violation>),

    #[error("missing artifact {}; run stage `{stage}` first", path.display())]
    MissingArtifact { path: PathBuf, stage: &'static str },

    #[error("{0}")]
    Usage(String),
}

fn join(violations: &[Violation]) -> String {
    violations.iter().map(Violation::to_string).collect::<Vec<_>>().join("; ")
}

impl CliError {
    /// Short machine-readable category name.
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Core(e) | CliError::InFile { source: e, .. } => e.category(),
            CliError::Config(_) => "config",
            CliError::MissingArtifact { .. } => "missing-artifact",
            CliError::Usage(_) => "usage",
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Attaches the file a core error came from.
pub trait InFile<T> {
    fn in_file(self, path: impl Into<PathBuf>) -> Result<T>;
}

impl<T> InFile<T> for smt_core::Result<T> {
    fn in_file(self, path: impl Into<PathBuf>) -> Result<T> {
        self.map_err(|source| match source {
            // Io errors already carry their path.
            e @ smt_core::Error::Io { .. } => CliError::Core(e),
            source => CliError::InFile {
                path: path.into(),
                source,
            },
        })
    }
}
