use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlgebraError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("subspace is not a two-sided ideal")]
    NotAnIdeal,
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is singular")]
    Singular,
    #[error("restricted right multiplications do not commute")]
    NonCommuting,
    #[error("unsupported field: {0}")]
    UnsupportedField(String),
    #[error("not in class: {0}")]
    NotInClass(String),
    #[error("inconsistent general form: {0}")]
    InconsistentForm(String),
    #[error("family shape mismatch: {0}")]
    Shape(String),
    #[error("search budget violated: {0}")]
    Budget(String),
    #[error("internal consistency failure: {0}")]
    Internal(String),
}

impl AlgebraError {
    /// Stable identifier surfaced by the command-line reports.
    pub fn code(&self) -> &'static str {
        match self {
            AlgebraError::Dimension { .. } => "E_DIMENSION",
            AlgebraError::Parse(_) => "E_PARSE",
            AlgebraError::NotAnIdeal => "E_NOT_IDEAL",
            AlgebraError::NotSquare { .. } => "E_NOT_SQUARE",
            AlgebraError::Singular => "E_SINGULAR",
            AlgebraError::NonCommuting => "E_NON_COMMUTING",
            AlgebraError::UnsupportedField(_) => "E_UNSUPPORTED_FIELD",
            AlgebraError::NotInClass(_) => "E_NOT_IN_CLASS",
            AlgebraError::InconsistentForm(_) => "E_INCONSISTENT_FORM",
            AlgebraError::Shape(_) => "E_SHAPE",
            AlgebraError::Budget(_) => "E_BUDGET",
            AlgebraError::Internal(_) => "E_INTERNAL",
        }
    }
}

pub type Result<T> = std::result::Result<T, AlgebraError>;
