use alloc::string::String;

/// Errors raised by the pure analysis routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CoreError {
    #[error("invalid cluster count {k} for {n} points")]
    InvalidK { k: usize, n: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },
    #[error("insufficient data: {retained} occurrences retained, {required} required")]
    InsufficientData { retained: usize, required: usize },
    #[error("concept is empty")]
    InvalidConcept,
    #[error("no class labels available for concept {concept_id}")]
    MissingLabels { concept_id: usize },
    #[error("missing artifact: {0}")]
    MissingArtifact(String),
    #[error("unknown reference: {0}")]
    UnknownReference(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid state transition {from} -> {to}")]
    InvalidTransition { from: &'static str, to: &'static str },
}

pub type Result<T, E = CoreError> = core::result::Result<T, E>;
