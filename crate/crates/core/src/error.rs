//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by construction and validation of domain objects.
#[derive(Debug, Error)]
pub enum Error {
    /// A path violated a structural invariant (absorption, finiteness, grid order).
    #[error("invalid path: {0}")]
    InvalidPath(String),

    /// A tree family or model law failed validation.
    #[error("invalid tree family: {0}")]
    InvalidTree(String),

    /// A claim is malformed or negative on a supported terminal node.
    #[error("invalid claim: {0}")]
    InvalidClaim(String),

    /// A deflator or killed measure failed validation.
    #[error("invalid deflator: {0}")]
    InvalidDeflator(String),

    /// Bad argument to a numeric routine.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A finite-difference grid violates the stability bound of the chosen stepper.
    #[error("unstable grid: {0}")]
    UnstableGrid(String),

    /// Guard against brute-force enumeration on oversize inputs.
    #[error("input too large: {0}")]
    TooLarge(String),

    /// JSON (de)serialization failure.
    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
