//! Error type shared across the toolkit.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A point had the wrong number of coordinates.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch {
        /// Dimension required by the target or state.
        expected: usize,
        /// Dimension actually supplied.
        got: usize,
    },

    /// Invalid configuration (kernel parameters, penalty settings, target spec).
    #[error("configuration error: {0}")]
    Config(String),

    /// Chain could not be initialised from the supplied points.
    #[error("initialisation error: {0}")]
    Init(String),

    /// Input data violated a precondition (empty sample, point outside support, ...).
    #[error("data error: {0}")]
    Data(String),

    /// A numeric quantity required by an operation was unusable (NaN/infinite).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// The penalised rejection sampler hit its trial cap; the caller should
    /// record the move as rejected rather than abort.
    #[error("penalised rejection sampler exceeded {0} trials")]
    SamplerFailure(u32),

    /// Underlying I/O failure while reading or writing artefacts.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// Malformed CSV while reading or writing a trace or table.
    #[error(transparent)]
    Csv(#[from] csv::Error),

    /// A trace, sample, or spec file could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
}
