//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Debug, Error)]
pub enum CoreError {
    /// Qubit count outside the supported range.
    #[error("qubit count {requested} outside supported range 1..={max}")]
    QubitCount { requested: usize, max: usize },

    /// Qubit index past the end of the register.
    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    QubitIndex { index: usize, n_qubits: usize },

    /// Structurally invalid configuration (shape mismatch, control == target, ...).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A non-finite value appeared where a finite one is required.
    #[error("non-finite value in {context}")]
    Numeric { context: String },

    /// A series generator left its sane operating region.
    #[error("series generation failed: {0}")]
    Generation(String),

    /// Min-max scaling is undefined for a constant series.
    #[error("cannot scale a constant series (max == min)")]
    ConstantSeries,

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CoreError {
    pub fn config(msg: impl Into<String>) -> Self {
        CoreError::Config(msg.into())
    }

    pub fn numeric(context: impl Into<String>) -> Self {
        CoreError::Numeric {
            context: context.into(),
        }
    }
}
