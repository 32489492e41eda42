use thiserror::Error;

/// Errors raised by model construction, evaluation and optimization.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid efficiencies: {0}")]
    InvalidEfficiencies(String),

    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("channel {index} needs mean pair number {mu:e}, above the overflow bound {bound:e}")]
    PumpOverflow { index: usize, mu: f64, bound: f64 },

    #[error("invalid SNR threshold {0}: must be finite and positive")]
    InvalidThreshold(f64),

    #[error("SNR threshold {theta} cannot be bracketed (SNR stays above it up to pump {mu:e})")]
    Unbracketable { theta: f64, mu: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
