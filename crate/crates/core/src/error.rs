use thiserror::Error;

/// Errors produced by the sampling and estimation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A desk-scale cost guard was exceeded.
    #[error("resource limit: {0}")]
    ResourceLimit(String),

    /// Floating-point breakdown, usually a sign that a matrix was not column-orthonormal.
    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}

pub(crate) fn too_large<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::ResourceLimit(msg.into()))
}
