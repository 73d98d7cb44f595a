use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by tensor operations, model construction, training and evaluation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        op: &'static str,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
    #[error("{op}: {message}")]
    InvalidArgument { op: &'static str, message: String },
    #[error("batch norm `{0}` evaluated before any running statistics were recorded")]
    MissingRunningStats(String),
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss {loss} at iteration {iteration} (batch samples {batch:?})")]
    NonFiniteLoss {
        iteration: u64,
        loss: f64,
        batch: Vec<usize>,
    },
    #[error("{0} is undefined for this input")]
    Undefined(&'static str),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn invalid(op: &'static str, message: impl Into<String>) -> Error {
    Error::InvalidArgument {
        op,
        message: message.into(),
    }
}
