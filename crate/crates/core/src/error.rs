use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("abundance must be non-negative, got {0}")]
    NegativeAbundance(f64),

    #[error("abundance {n} outside tabulated range [{lo}, {hi}]")]
    OutOfTableRange { n: f64, lo: f64, hi: f64 },

    #[error("invalid growth law: {0}")]
    InvalidLaw(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("noise amplitude must be non-negative, got {0}")]
    InvalidNoise(f64),

    #[error("grid resolution must be at least 2, got {0}")]
    BadResolution(usize),

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("per capita rate non-positive at N = {0}: closure integral diverges")]
    NonPositiveRate(f64),

    #[error("infeasible setup: {0}")]
    Infeasible(String),

    #[error("{0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
