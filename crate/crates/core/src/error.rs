use thiserror::Error;

#[derive(Debug, Error)]
pub enum GptError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: String, found: String },
    #[error("systems cannot be composed: {0}")]
    Composition(String),
    #[error("unsupported for this model: {0}")]
    Unsupported(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("division guard: {0}")]
    DivisionGuard(String),
    #[error("wiring mismatch: {0}")]
    Wiring(String),
    #[error("face is empty")]
    EmptyFace,
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, GptError>;

pub(crate) fn dim_err(expected: impl ToString, found: impl ToString) -> GptError {
    GptError::Dimension {
        expected: expected.to_string(),
        found: found.to_string(),
    }
}
