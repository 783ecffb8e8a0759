use std::io;

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid tensor train: {0}")]
    InvalidTensorTrain(String),

    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("matrix is not symmetric (max deviation {deviation:e}, tolerance {tolerance:e})")]
    Asymmetric { deviation: f64, tolerance: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Numerical(e.to_string())
    }
}

impl From<ndarray::ShapeError> for Error {
    fn from(e: ndarray::ShapeError) -> Self {
        Error::DimensionMismatch(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
