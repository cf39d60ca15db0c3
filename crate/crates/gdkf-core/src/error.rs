//! Error type shared across the crate.

use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("{op}: dimension mismatch, left is {lhs_rows}x{lhs_cols}, right is {rhs_rows}x{rhs_cols}")]
    DimMismatch {
        op: &'static str,
        lhs_rows: usize,
        lhs_cols: usize,
        rhs_rows: usize,
        rhs_cols: usize,
    },

    #[error("{op}: matrix must be square, got {rows}x{cols}")]
    NotSquare {
        op: &'static str,
        rows: usize,
        cols: usize,
    },

    #[error("{op}: matrix is not symmetric (max asymmetry {max_asym:e})")]
    NotSymmetric { op: &'static str, max_asym: f64 },

    #[error("{op}: matrix is not positive definite (pivot {pivot:e} at index {index})")]
    NotPositiveDefinite {
        op: &'static str,
        pivot: f64,
        index: usize,
    },

    #[error("{op}: non-finite value encountered")]
    NonFinite { op: &'static str },

    #[error("inference diverged: non-finite iterate at gradient step {step}")]
    Divergence { step: usize },

    #[error("learning diverged at timestep {timestep}: non-finite weight update; try a smaller learning rate")]
    LearningDivergence { timestep: usize },

    #[error("{op}: invalid argument: {reason}")]
    InvalidArgument { op: &'static str, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
