use thiserror::Error;

/// Errors raised by every module of the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("horizon n = {0} is below 2; the chain recursion starts at n = 2")]
    HorizonTooSmall(usize),

    #[error("index n = {n} lies beyond the explicit schedule (last defined index {last})")]
    ScheduleExhausted { n: usize, last: usize },

    #[error("schedule violates regime {regime} at n = {n}: {condition}")]
    RegimeViolation {
        regime: &'static str,
        n: usize,
        condition: String,
    },

    #[error("missing moment constant `{0}`")]
    MissingConstant(&'static str),

    #[error("order q = {q} outside {range}")]
    OrderOutOfRange { q: f64, range: &'static str },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },

    #[error("exact enumeration needs {paths} noise paths, limit is {limit}")]
    EnumerationTooLarge { paths: u128, limit: u128 },

    #[error("metadata mismatch: {0}")]
    MetadataMismatch(String),

    #[error("pilot seed {0} collides with the main seed")]
    SeedCollision(u64),
}

pub type Result<T> = std::result::Result<T, BoundError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> BoundError {
    BoundError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
