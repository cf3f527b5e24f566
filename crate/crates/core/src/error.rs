use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Structural problem in an input file (ragged rows, missing header).
    #[error("format error at row {row}: {message}")]
    Format { row: usize, message: String },

    /// A cell that should hold a number does not.
    #[error("cannot parse {value:?} as a number at row {row}, column {column}")]
    Parse {
        row: usize,
        column: usize,
        value: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_fold(self, fold: usize) -> Self {
        match self {
            e @ Error::Fold { .. } => e,
            e => Error::Fold {
                fold,
                source: Box::new(e),
            },
        }
    }

    /// True for errors caused by the input data rather than by the caller.
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::Format { .. } | Error::Parse { .. } | Error::Validation(_) | Error::Csv(_) => {
                true
            }
            Error::Fold { source, .. } => source.is_data_error(),
            _ => false,
        }
    }
}
