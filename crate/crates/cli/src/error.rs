use std::io;
use std::path::PathBuf;

use ttclass_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Io { .. } | CliError::Malformed(_) | CliError::Json(_) => EXIT_IO,
            CliError::Core(e) => match e {
                CoreError::DimensionMismatch(_)
                | CoreError::InvalidTensorTrain(_)
                | CoreError::SizeLimit(_)
                | CoreError::InvalidConfig(_) => EXIT_VALIDATION,
                CoreError::Degenerate(_) | CoreError::Asymmetric { .. } | CoreError::Numerical(_) => EXIT_NUMERICAL,
                CoreError::Format(_) | CoreError::Io(_) => EXIT_IO,
            },
        }
    }
}
