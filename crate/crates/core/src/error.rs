//! Error type shared across the library.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the gesture pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Input values violate a precondition (shape, range, finiteness).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A signal was too short to produce even one analysis window.
    #[error("signal too short: {0}")]
    SignalTooShort(String),

    /// Configuration failed validation; lists the offending fields.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A training set lacks required class coverage.
    #[error("missing class coverage: {0}")]
    MissingClass(String),

    /// Training data admits no meaningful fit (e.g. a single class).
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    /// Iterative optimization diverged.
    #[error("optimization diverged: {0}")]
    Diverged(String),

    /// An example's label does not have the kind an operation requires.
    #[error("label kind mismatch: {0}")]
    LabelKind(String),

    /// A pairwise-distance statistic degenerated (all items identical).
    #[error("degenerate statistic: {0}")]
    DegenerateStatistic(String),

    /// A session's block layout does not match the canonical structure.
    #[error("malformed session structure: {0}")]
    Structure(String),

    /// A persisted file declares an unsupported format version.
    #[error("unsupported format version {found} (supported: {supported})")]
    Version { found: u32, supported: u32 },

    /// A persisted file is unreadable or internally inconsistent.
    #[error("corrupt file: {0}")]
    Corrupt(String),

    /// A persisted file is readable but lacks required fields.
    #[error("missing field: {0}")]
    MissingField(String),

    /// Underlying I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
