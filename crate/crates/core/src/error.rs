use thiserror::Error;

use crate::polygon::Pair;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResonanceError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("exponential overflow: |exponent| {exponent:.3e} exceeds the guard of {limit}")]
    Overflow { exponent: f64, limit: f64 },

    #[error("pole of R_{index}/T_{index}: |2iz - C h^beta| = {distance:.3e}")]
    Pole { index: usize, distance: f64 },

    #[error("system is not generic: {0}")]
    NonGeneric(String),

    #[error("polygon structure violated between hull vertices {left} and {right}: {reason}")]
    InternalConsistency { left: Pair, right: Pair, reason: String },

    #[error("index-set enumeration is limited to N <= {limit}, got N = {n}")]
    TooManyDeltas { n: usize, limit: usize },
}

pub type Result<T> = std::result::Result<T, ResonanceError>;
