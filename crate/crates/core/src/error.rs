use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Invalid construction parameter (particle count, run count, checkpoints).
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A measurement outcome or projection whose probability is numerically zero.
    #[error("impossible outcome: {what} has probability {probability:e}")]
    ImpossibleOutcome { what: String, probability: f64 },

    /// A state that violates the normalization contract of an operation.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Ramsey estimate with an outcome probability of exactly 0 or 1.
    #[error("degenerate probability {0}: the uncertainty estimate is undefined")]
    DegenerateProbability(f64),
}
