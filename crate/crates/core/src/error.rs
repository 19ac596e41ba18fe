use thiserror::Error;

/// Errors raised by construction, auditing and experiment code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of range for size {size}")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("invalid stochastic vector: {0}")]
    InvalidVector(String),
    #[error("non-finite input")]
    NonFinite,
    #[error("invalid population: {0}")]
    InvalidPopulation(String),
    #[error("invalid type space: {0}")]
    InvalidTypeSpace(String),
    #[error("invalid group collection: {0}")]
    InvalidGroups(String),
    #[error("invalid discretization step {0}")]
    InvalidLambda(f64),
    #[error("invalid loss: {0}")]
    InvalidLoss(String),
    #[error("invalid rule: {0}")]
    InvalidRule(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("group {0} has zero mass")]
    ZeroMass(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("missing certificate: {0}")]
    MissingCertificate(String),
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("degenerate subset (realized fraction {0}); re-key")]
    DegenerateSubset(f64),
    #[error("probe set {id} too small (fraction {fraction})")]
    UndersizedProbe { id: String, fraction: f64 },
    #[error("serialization: {0}")]
    Serde(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
