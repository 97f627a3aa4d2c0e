use thiserror::Error;

/// Errors produced by the optimization library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("missing problem constant `{0}`")]
    MissingConstant(&'static str),

    #[error("residual state used before initialization")]
    Uninitialized,

    #[error("run aborted at iteration {iteration}: {reason}")]
    Aborted { iteration: usize, reason: String },

    #[error("instance file error: {0}")]
    InstanceFile(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
