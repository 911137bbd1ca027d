use conceptlens_core::CoreError;
use serde_json::{json, Value};

/// Failures surfaced by the store, the pipeline and the HTTP layer.
#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("invalid artifact: {0}")]
    InvalidArtifact(String),
    #[error("artifact is not valid UTF-8 (line {line})")]
    Encoding { line: usize },
    #[error("tag file disagrees with corpus at sentence {sentence}, position {position}")]
    AlignmentMismatch {
        sentence: usize,
        position: usize,
        expected: Option<String>,
        found: Option<String>,
    },
    #[error("missing artifacts: {}", missing.join(", "))]
    PreconditionFailed { missing: Vec<String> },
    #[error("{0} not found")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Validation(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt store file: {0}")]
    Corrupt(String),
}

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;

impl ServiceError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::Core(e) => match e {
                CoreError::InvalidK { .. } => "INVALID_K",
                CoreError::NonFinite { .. } | CoreError::Numeric(_) => "NUMERIC_ERROR",
                CoreError::Shape { .. } => "SHAPE_ERROR",
                CoreError::InsufficientData { .. } => "INSUFFICIENT_DATA",
                CoreError::InvalidConcept => "INVALID_CONCEPT",
                CoreError::MissingLabels { .. } => "MISSING_LABELS",
                CoreError::MissingArtifact(_) => "MISSING_ARTIFACT",
                CoreError::UnknownReference(_) => "UNKNOWN_REFERENCE",
                CoreError::InvalidConfig(_) => "VALIDATION_ERROR",
                CoreError::InvalidTransition { .. } => "INVALID_TRANSITION",
            },
            ServiceError::InvalidArtifact(_) => "INVALID_ARTIFACT",
            ServiceError::Encoding { .. } => "ENCODING_ERROR",
            ServiceError::AlignmentMismatch { .. } => "ALIGNMENT_MISMATCH",
            ServiceError::PreconditionFailed { .. } => "PRECONDITION_FAILED",
            ServiceError::NotFound(_) => "NOT_FOUND",
            ServiceError::Conflict(_) => "CONFLICT",
            ServiceError::Validation(_) => "VALIDATION_ERROR",
            ServiceError::Io(_) | ServiceError::Corrupt(_) => "INTERNAL",
        }
    }

    /// HTTP status for this error.
    pub fn status(&self) -> u16 {
        match self {
            ServiceError::Core(CoreError::MissingArtifact(_)) => 404,
            ServiceError::Core(CoreError::InvalidTransition { .. }) => 409,
            ServiceError::Core(_)
            | ServiceError::InvalidArtifact(_)
            | ServiceError::Encoding { .. }
            | ServiceError::AlignmentMismatch { .. }
            | ServiceError::Validation(_) => 422,
            ServiceError::PreconditionFailed { .. } => 412,
            ServiceError::NotFound(_) => 404,
            ServiceError::Conflict(_) => 409,
            ServiceError::Io(_) | ServiceError::Corrupt(_) => 500,
        }
    }

    pub fn details(&self) -> Value {
        match self {
            ServiceError::Core(CoreError::NonFinite { row, col }) => json!({ "row": row, "col": col }),
            ServiceError::Core(CoreError::Shape { expected, actual }) => {
                json!({ "expected": expected, "actual": actual })
            }
            ServiceError::Core(CoreError::InsufficientData { retained, required }) => {
                json!({ "retained": retained, "required": required })
            }
            ServiceError::Core(CoreError::InvalidK { k, n }) => json!({ "k": k, "n": n }),
            ServiceError::Encoding { line } => json!({ "line": line }),
            ServiceError::AlignmentMismatch {
                sentence,
                position,
                expected,
                found,
            } => json!({
                "sentence": sentence,
                "position": position,
                "expected": expected,
                "found": found,
            }),
            ServiceError::PreconditionFailed { missing } => json!({ "missing": missing }),
            _ => Value::Null,
        }
    }

    /// The `{code, message, details}` error body.
    pub fn body(&self) -> Value {
        json!({
            "code": self.code(),
            "message": self.to_string(),
            "details": self.details(),
        })
    }
}

impl From<serde_json::Error> for ServiceError {
    fn from(e: serde_json::Error) -> Self {
        ServiceError::Corrupt(e.to_string())
    }
}
