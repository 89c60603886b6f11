//! Error type shared across the simulation library.

use thiserror::Error;

/// Library-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A machine definition violated a structural requirement (bad halt
    /// index, missing rule, out-of-range processor label, ...).
    #[error("invalid machine: {0}")]
    InvalidMachine(String),

    /// A state violated a precondition of the operation (zero norm,
    /// mismatched processor width, empty superposition, ...).
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// A matrix failed a structural check (dimension mismatch, not
    /// unitary / Hermitian / positive within tolerance, ...).
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    /// A reduced-density request referenced a qubit that is undefined for
    /// the state, for example a tape cell no stored configuration covers.
    #[error("undefined qubit: {0}")]
    UndefinedQubit(String),

    /// A requested dense object would exceed the configured size cap.
    #[error("dimension {dim} exceeds cap {cap}: {context}")]
    DimensionCap { dim: usize, cap: usize, context: String },

    /// The state left the finite window during a windowed comparison, so
    /// the cyclic operator no longer tracks the infinite-tape evolution.
    #[error("state escaped the window at step {step} (window length {window_len})")]
    WindowEscape { step: usize, window_len: usize },

    /// A parameter was outside its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
