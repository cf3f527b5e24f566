use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const INVALID_CONFIG: i32 = 2;
    pub const DATASET: i32 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dataset {path}: {source}")]
    Dataset {
        path: PathBuf,
        #[source]
        source: spectral_bench::Error,
    },

    #[error("{0}")]
    Core(#[from] spectral_bench::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::INVALID_CONFIG,
            CliError::Dataset { .. } => exit::DATASET,
            CliError::Core(e) if e.is_data_error() => exit::DATASET,
            CliError::Core(e) if matches!(innermost(e), spectral_bench::Error::Argument(_)) => {
                exit::INVALID_CONFIG
            }
            _ => exit::FAILURE,
        }
    }
}

fn innermost(e: &spectral_bench::Error) -> &spectral_bench::Error {
    match e {
        spectral_bench::Error::Fold { source, .. } => innermost(source),
        e => e,
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
