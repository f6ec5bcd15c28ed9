use thiserror::Error;

use crate::measurements::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("null-space index {index} out of range 1..={order}")]
    IndexOutOfRange { index: usize, order: usize },

    #[error(
        "Gram matrix of the generators is singular (|det G| = {det:e}, threshold {threshold:e})"
    )]
    SingularGram { det: f64, threshold: f64 },

    #[error("function has unbounded support; integral is not defined")]
    UnboundedSupport,

    #[error("test function has regularity {have}, operator needs {need}")]
    InsufficientSmoothness { have: usize, need: usize },

    #[error("derivative order ({d1}, {d2}) not below operator orders ({n1}, {n2})")]
    OrderTooHigh {
        d1: usize,
        d2: usize,
        n1: usize,
        n2: usize,
    },

    #[error("operation requires fundamental systems on both axes")]
    NotFundamental,

    #[error("inadmissible measurement functional #{index}: {violation}")]
    Inadmissible { index: usize, violation: Violation },

    #[error("assumption check failed: {0}")]
    AssumptionFailure(String),

    #[error("null-space measurement block has rank {rank}, expected {expected}")]
    RankDeficientNullBlock { rank: usize, expected: usize },

    #[error("solver stopped after {iterations} iterations with duality gap {gap:e}")]
    NoConvergence { iterations: usize, gap: f64 },

    #[error("no measurement-preserving direction found at support size {support} (bound {bound})")]
    NumericalStall { support: usize, bound: usize },

    #[error("brute-force oracle limits exceeded: {0}")]
    TooLarge(String),
}
