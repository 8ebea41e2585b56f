use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid arguments: dimension mismatch, bad parameter ranges, zero rows.
    #[error("usage error: {0}")]
    Usage(String),

    /// A random draw produced an unusable object (rank-deficient basis, empty null space).
    #[error("generation error: {0}")]
    Generation(String),

    /// Row-action step with `‖Aᵀη‖ = 0`: the selected residual lies outside range(A).
    #[error("row method stalled on inconsistent system at iteration {iteration}")]
    Stalled { iteration: usize },

    /// Column-action step with `‖Aξ‖ = 0`.
    #[error("degenerate column step at iteration {iteration}: selected columns cancel")]
    DegenerateStep { iteration: usize },

    #[error("CGLS did not converge in {iterations} iterations (relative normal residual {residual:e})")]
    Subsolver { iterations: usize, residual: f64 },

    /// Instance too large for the dense SVD used by bound verification.
    #[error("size guard: {0}")]
    SizeGuard(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
