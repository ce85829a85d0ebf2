//! Error type shared by every module of the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong when configuring or running an
/// identification experiment.
#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument was NaN or infinite where a finite value is
    /// required.
    #[error("{name} must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },

    /// An argument violated a documented precondition (range, ordering,
    /// emptiness, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A vector or matrix had the wrong dimension.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A finite input sequence was asked for more regressors than it holds.
    #[error("input sequence exhausted: requested {requested}, available {available}")]
    SequenceExhausted { requested: usize, available: usize },

    /// The regressor sequence does not excite every direction of the
    /// parameter space (rank-deficient information accumulation).
    #[error("excitation failure: {0}")]
    Excitation(String),

    /// The switching probability is numerically 0 or 1, so a single binary
    /// observation carries no usable curvature.
    #[error("degenerate information: switching probability {probability} at the evaluation point")]
    DegenerateInformation { probability: f64 },

    /// A requested design computation has no usable answer (for example a
    /// density floor that underflows to zero).
    #[error("infeasible design request: {0}")]
    Infeasible(String),

    /// An estimator state stopped satisfying its own invariants.
    #[error("estimator state corrupted: {0}")]
    StateCorruption(String),

    /// A curve fit could not be performed on the data provided.
    #[error("fit failure: {0}")]
    FitFailure(String),

    /// Underlying I/O failure while reading or writing experiment files.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// A text file (CSV input, ...) could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
}
