use thiserror::Error;

use crate::solver::RegimeKind;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("rate vector has {got} entries but the network has {expected} sources")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("sleep rate r[{index}] = {value} is not strictly positive")]
    NonPositiveRate { index: usize, value: f64 },

    #[error("invalid source {index}: {reason}")]
    InvalidSource { index: usize, reason: String },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid battery: {0}")]
    InvalidBattery(String),

    #[error("no sources given")]
    NoSources,

    #[error("operation requires the {expected} regime but the instance is {actual}")]
    RegimeMismatch {
        expected: RegimeKind,
        actual: RegimeKind,
    },

    /// Zero sensing time in the energy-adequate regime: x* is unbounded and
    /// only the limiting value (`asymptotic_optimum`) is meaningful.
    #[error("sensing ratio is zero in the energy-adequate regime; use asymptotic_optimum")]
    AsymptoticRegime,

    #[error("brute-force oracle supports at most {max} sources, got {got}")]
    TooManySources { max: usize, got: usize },

    #[error("source {index} has no battery specification")]
    MissingBattery { index: usize },

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
