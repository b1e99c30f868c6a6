use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// Shapes, scenarios or indices do not fit together.
    #[error("structural error: {0}")]
    Structural(String),
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
    #[error("solver error: {0}")]
    Solver(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn structural(msg: impl Into<String>) -> Error {
    Error::Structural(msg.into())
}
