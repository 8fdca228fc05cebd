//! Error type shared across the crate.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum MarketError {
    /// A value or combination of values violates a documented invariant.
    Invalid(String),
    /// Two sequences that must agree in length do not.
    Dimension { expected: usize, found: usize },
    /// An operation requires a nonempty input.
    Empty(&'static str),
    /// The task graph contains a cycle; the edge closes it.
    Cycle { from: String, to: String },
    /// Exhaustive search would exceed the configured cap.
    CapExceeded { combinations: f64, cap: f64 },
    /// Cosine similarity of a zero vector is undefined.
    ZeroVector,
    /// Iteration did not converge within the step limit.
    NoConvergence { steps: u64 },
    /// An id does not resolve against the available set.
    UnknownId(String),
}

impl fmt::Display for MarketError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MarketError::Invalid(msg) => write!(f, "invalid input: {msg}"),
            MarketError::Dimension { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            MarketError::Empty(what) => write!(f, "empty input: {what}"),
            MarketError::Cycle { from, to } => {
                write!(f, "cycle detected: edge {from} -> {to} closes a cycle")
            }
            MarketError::CapExceeded { combinations, cap } => {
                write!(f, "search space of {combinations} assignments exceeds cap {cap}")
            }
            MarketError::ZeroVector => write!(f, "cosine similarity of a zero vector"),
            MarketError::NoConvergence { steps } => {
                write!(f, "no convergence after {steps} steps")
            }
            MarketError::UnknownId(id) => write!(f, "unknown id: {id}"),
        }
    }
}

impl std::error::Error for MarketError {}

pub type Result<T> = std::result::Result<T, MarketError>;
