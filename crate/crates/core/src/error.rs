use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid age {age} for associativity {assoc}")]
    InvalidAge { age: usize, assoc: usize },

    #[error("invalid associativity {assoc} for {policy}: {reason}")]
    InvalidAssoc {
        assoc: usize,
        policy: &'static str,
        reason: &'static str,
    },

    #[error("unknown block {0}")]
    UnknownBlock(String),

    #[error("unknown input {0}")]
    UnknownInput(String),

    #[error("need {needed} filler blocks, universe has {available}")]
    InsufficientFillers { needed: usize, available: usize },

    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("state set exceeds the cap of {cap} states")]
    StateCap { cap: usize },

    #[error("{what} = {value} is out of range ({range})")]
    OutOfRange {
        what: &'static str,
        value: usize,
        range: String,
    },

    #[error("invalid probability {0}")]
    InvalidProbability(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
