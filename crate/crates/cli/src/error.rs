use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Core { path: PathBuf, source: morphkit::Error },
    #[error("{0}")]
    Engine(#[from] morphkit::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{failed} of {total} registrations failed")]
    Batch { failed: usize, total: usize, code: i32 },
}

impl CliError {
    pub fn at(path: impl Into<PathBuf>) -> impl FnOnce(morphkit::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Core { path, source }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    /// 2 for malformed input (bad file format, table schema, usage), 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use morphkit::Error as E;
        let input = |e: &E| matches!(e, E::Format { .. } | E::Schema(_) | E::Value { .. } | E::EmptyTable);
        match self {
            CliError::Core { source, .. } | CliError::Engine(source) if input(source) => 2,
            CliError::Usage(_) | CliError::Csv(_) => 2,
            CliError::Batch { code, .. } => *code,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
