use thiserror::Error;

/// Errors raised by validation, simulation and the checking routines.
///
/// Row and column fields are 0-based; the rendered messages use the 1-based
/// state labels seen by users.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("state space needs at least 2 states, got {0}")]
    TooFewStates(usize),

    #[error("non-finite value at ({}, {})", .row + 1, .col + 1)]
    NonFinite { row: usize, col: usize },

    #[error("negative entry {value} at ({}, {})", .row + 1, .col + 1)]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("row {} sums to {sum}, expected 1", .row + 1)]
    RowSumNotOne { row: usize, sum: f64 },

    #[error("zero entry at ({}, {}) but strict positivity is required", .row + 1, .col + 1)]
    ZeroEntryWhenPositivityRequired { row: usize, col: usize },

    #[error("negative off-diagonal rate {value} at ({}, {})", .row + 1, .col + 1)]
    NegativeOffDiagonal { row: usize, col: usize, value: f64 },

    #[error("row {} sums to {sum}, expected 0", .row + 1)]
    RowSumNotZero { row: usize, sum: f64 },

    #[error("zero off-diagonal rate at ({}, {}) but strict positivity is required", .row + 1, .col + 1)]
    ZeroOffDiagonalWhenPositivityRequired { row: usize, col: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("state index {state} out of range for {n_states} states")]
    InvalidState { state: usize, n_states: usize },

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("invalid time or horizon: {0}")]
    InvalidTime(f64),

    #[error("time {time} outside [0, {horizon}]")]
    TimeOutOfRange { time: f64, horizon: f64 },

    #[error("coefficients leave the generator cone: rate {value} at ({}, {})", .row + 1, .col + 1)]
    InfeasibleCoefficients { row: usize, col: usize, value: f64 },

    #[error("reference law must be strictly positive, violated at ({}, {})", .row + 1, .col + 1)]
    ReferenceNotPositive { row: usize, col: usize },

    #[error("enumeration needs {paths} paths, limit is {limit}")]
    ScaleTooLarge { paths: f64, limit: f64 },

    #[error("increment is not centred under the reference row: mean {mean}")]
    NotCentered { mean: f64 },

    #[error("likelihood must be positive, got {0}")]
    ZeroLikelihood(f64),

    #[error("recovered probability {value} at ({}, {}) is negative", .row + 1, .col + 1)]
    NegativeProbability { row: usize, col: usize, value: f64 },

    #[error("reference row {} has zero diagonal (absorbing state)", .row + 1)]
    DegenerateReference { row: usize },

    #[error("target rate vanishes at ({}, {}) so its logarithm is undefined", .row + 1, .col + 1)]
    ZeroTargetRate { row: usize, col: usize },

    #[error("path has zero probability under the reference law")]
    ZeroReferenceProbability,

    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
