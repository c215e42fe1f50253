use thiserror::Error;

use crate::gmdp::StateSet;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("dominance between {left} and {right} is undecidable")]
    UndecidableDominance { left: String, right: String },

    #[error("could not generate a valid instance after {attempts} attempts")]
    GenerationFailed { attempts: usize },

    #[error("invalid mix: arm {i} is not above the threshold or arm {j} is not below it")]
    InvalidMix { i: usize, j: usize },

    #[error("portfolio support leaves the state {state}")]
    InvalidSupport { state: StateSet },

    #[error("portfolio is not P-valid at state {state}: {reason}")]
    NotPValid { state: StateSet, reason: String },

    #[error("policy has no entry for reachable state {state}")]
    IncompletePolicy { state: StateSet },

    #[error("exact terminal rewards need discrete priors; arm {arm} is unbounded")]
    UnsupportedExact { arm: usize },

    #[error("operation needs bounded discrete priors; {0}")]
    Unsupported(String),

    #[error("{k} arms exceed the limit of {limit} for this operation")]
    TooManyArms { k: usize, limit: usize },

    #[error("assumption violated: {0}")]
    AssumptionViolation(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{0}")]
    Config(String),
}
