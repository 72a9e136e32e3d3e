//! Error type shared by the whole crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible shapes in a matrix or layer operation.
    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Dim {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },

    /// A caller-supplied parameter is outside its documented range.
    #[error("invalid parameter: {0}")]
    Param(String),

    /// Paired inputs disagree on sample count.
    #[error("alignment error: {0}")]
    Alignment(String),

    /// A data file could not be parsed; positions are 1-based.
    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    /// A label value is outside 0..k-1.
    #[error("label error at row {row}: value {value} not in 0..{k}")]
    Label { row: usize, value: i64, k: usize },

    /// A soft-assignment column collapsed to zero mass.
    #[error("degenerate cluster: column {0} of Q has zero total mass")]
    DegenerateCluster(usize),

    /// Training produced a non-finite loss; aborted rather than clamped.
    #[error("divergence: non-finite {loss} loss ({value}) at epoch {epoch}")]
    Divergence {
        loss: String,
        epoch: usize,
        value: f64,
    },

    /// A checkpoint file is malformed or has an unknown format tag.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }
}
