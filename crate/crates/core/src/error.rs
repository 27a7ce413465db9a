use thiserror::Error;

/// Errors produced by the observer library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The requested configuration has error dynamics on or outside the unit circle.
    #[error("unstable configuration: spectral radius {radius} is not below 1")]
    Unstable { radius: f64 },

    /// The closed-loop state left the finite range at the given step.
    #[error("simulation diverged at step {step} (t = {time} s)")]
    Divergence { step: usize, time: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
