use thiserror::Error;

/// Errors produced anywhere in the laboratory.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("precision must lie in 1..=64 bits, got {0}")]
    InvalidPrecision(u32),

    #[error("precision mismatch: {left} bits vs {right} bits")]
    PrecisionMismatch { left: u32, right: u32 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("value {value} does not fit in {bits} bits")]
    ValueOutOfRange { value: u64, bits: u32 },

    #[error("enumeration of {needed} items exceeds the budget of {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("invalid machine: {0}")]
    InvalidMachine(String),

    #[error("rule error at layer {layer}, time {t}: {message}")]
    Rule {
        layer: usize,
        t: usize,
        message: String,
    },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("malformed stream: {0}")]
    MalformedStream(String),

    #[error("thought budget of {budget} exceeded at position {position}")]
    ThoughtBudgetExceeded { position: usize, budget: usize },

    #[error("step counter overflow: more than {horizon} internal steps")]
    HorizonExceeded { horizon: usize },

    #[error("memory requires {needed} bits but only {available} are available")]
    InsufficientMemory { needed: usize, available: usize },

    #[error("state is outside the image of the memory encoding")]
    NotInEncodingImage,

    #[error("protocol precondition violated: {0}")]
    Protocol(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
