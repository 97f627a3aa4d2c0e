use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("{path}: {inner}")]
    InFile { path: PathBuf, inner: Box<CliError> },

    #[error("malformed output `{path}`: {reason}")]
    Output { path: PathBuf, reason: String },

    #[error(transparent)]
    Core(#[from] ddzo::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn in_file(self, path: &Path) -> Self {
        CliError::InFile {
            path: path.to_path_buf(),
            inner: Box::new(self),
        }
    }

    pub fn output(path: &Path, reason: impl Into<String>) -> Self {
        CliError::Output {
            path: path.to_path_buf(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
