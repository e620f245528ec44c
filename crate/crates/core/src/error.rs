use thiserror::Error;

/// Errors raised by the group, operator, jet, sampling and verification layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("coordinate index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular point: {0}")]
    SingularPoint(String),

    #[error("potential family `{family}` is not defined on group `{group}`")]
    FamilyGroupMismatch { family: String, group: String },

    #[error("operator order {order} exceeds the cap {cap}")]
    OperatorOverflow { order: usize, cap: usize },

    #[error("unsupported structure: {0}")]
    UnsupportedStructure(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("tainted estimate: observable is {value} at point {point:?}")]
    TaintedEstimate { value: f64, point: Vec<f64> },

    #[error("truncation error: {message}; try radius >= {suggested_radius}")]
    Truncation {
        message: String,
        suggested_radius: f64,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),

    #[error("condition failed: {0}")]
    ConditionFailed(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

pub type Result<T> = std::result::Result<T, Error>;
