use thiserror::Error;

/// Errors raised by the swarm control library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate base point: |x| = {norm:e} is below {threshold:e}")]
    DegenerateBasePoint { norm: f64, threshold: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: String, reason: String },

    /// A state norm left the admissible band or became non-finite during a
    /// forward solve.
    #[error("integrator abort at step {step}, particle {particle}: {reason}")]
    IntegratorAbort {
        step: usize,
        particle: usize,
        reason: String,
    },

    #[error("adjoint solve produced non-finite values at step {step}")]
    AdjointNonFinite { step: usize },

    #[error("velocity bound undefined: well-posedness margin {margin} is not below 1")]
    BoundUndefined { margin: f64 },
}

impl Error {
    pub(crate) fn param(field: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
