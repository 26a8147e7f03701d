use thiserror::Error;

/// Errors raised by model construction, quantile evaluation, tests, and the
/// Monte Carlo harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of range 1..={horizon}")]
    IndexOutOfRange { index: usize, horizon: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("level must lie strictly inside (0,1), got {0}")]
    InvalidLevel(f64),
    #[error("alpha + beta must be < 1, got {0}")]
    LevelsSumTooLarge(f64),
    #[error("no closed form available: {0}")]
    NoClosedForm(String),
    #[error("subset enumeration too large: C({n},{k}) exceeds cap {cap}")]
    CombinatorialBlowup { n: usize, k: usize, cap: u64 },
    #[error("bisection bracket does not straddle the target power: {0}")]
    BracketDoesNotStraddle(String),
    #[error("test level unverified: {0}")]
    LevelUnverified(String),
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
