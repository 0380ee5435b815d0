//! Error type shared by every module.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("row {row} of the transition matrix sums to {sum}, expected 1")]
    NonStochasticRow { row: usize, sum: f64 },
    #[error("transition matrix entry ({row}, {col}) is negative or not finite: {value}")]
    NegativeProbability { row: usize, col: usize, value: f64 },
    #[error("volatility of state {state} must be positive and finite, got {value}")]
    NegativeVol { state: usize, value: f64 },
    #[error("dimension mismatch: {0}")]
    BadDimension(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("Markov chain is not ergodic: {0}")]
    NonErgodic(String),
    #[error("bias window has length {got}, expected {expected}")]
    WindowLengthMismatch { expected: usize, got: usize },
    #[error("time {n} is not an interaction time for period {phi}")]
    NotInteractionTime { n: usize, phi: usize },
    #[error("degenerate variance at n={n}, regime {regime}: denominator {denominator}")]
    DegenerateVariance { n: usize, regime: usize, denominator: f64 },
    #[error("degenerate Sharpe denominator: {0}")]
    DegenerateDenominator(f64),
    #[error("clamped probability mass {fraction:.4e} exceeds the limit {limit:.4e}")]
    GridExhausted { fraction: f64, limit: f64 },
    #[error("no sign change for the implied risk aversion at n={n}, regime {regime}")]
    RootBracketFailure { n: usize, regime: usize },
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("division by zero: {0}")]
    DivisionByZero(String),
}

impl Error {
    /// True for errors caused by bad inputs rather than numerical breakdown.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::NonStochasticRow { .. }
                | Error::NegativeProbability { .. }
                | Error::NegativeVol { .. }
                | Error::BadDimension(_)
                | Error::InvalidParameter(_)
                | Error::NonErgodic(_)
                | Error::WindowLengthMismatch { .. }
                | Error::NotInteractionTime { .. }
                | Error::InsufficientSamples { .. }
                | Error::DivisionByZero(_)
        )
    }
}
