use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
///
/// Divergent integrals and undecidable verdicts are *results*, not errors;
/// they are reported through the return types of the individual operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("insufficient resolution: {0}")]
    Resolution(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("alpha = {0} is a pole of Gamma(1 - alpha)")]
    GammaPole(f64),
    #[error("coincident points: {0}")]
    CoincidentPoints(String),
    #[error("point outside the domain: {0}")]
    OutOfDomain(String),
    #[error("ill-conditioned matrix: {0}")]
    Conditioning(String),
    #[error("numerical overflow: {0}")]
    Overflow(String),
    #[error("unstable integration: {0}")]
    Instability(String),
    #[error("chain did not converge: {0}")]
    Convergence(String),
    #[error("importance weights degenerate: {0}")]
    Reweighting(String),
    #[error("too few samples: {0}")]
    Undersampled(String),
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(LabError::InvalidArgument(msg.into()))
}
