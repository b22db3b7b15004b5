use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{field} = {value} is outside [{min}, {max}]")]
    RangeViolation {
        field: String,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    Shape {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("invalid buffer: {0}")]
    InvalidBuffer(String),

    #[error("mask is empty after binarization")]
    EmptyMask,

    #[error("mask covers the whole image after binarization")]
    FullMask,

    #[error("image is too small: largest side {max_side}px, need at least {min}px")]
    InputTooSmall { max_side: usize, min: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("objective is not finite at iteration {iteration}")]
    NonFiniteObjective { iteration: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),

    #[error("invalid pipeline order: {0}")]
    InvalidOrder(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("saliency provider failed: {0}")]
    Provider(String),
}

impl Error {
    pub(crate) fn range(field: impl Into<String>, value: f64, min: f64, max: f64) -> Self {
        Error::RangeViolation {
            field: field.into(),
            value,
            min,
            max,
        }
    }
}
