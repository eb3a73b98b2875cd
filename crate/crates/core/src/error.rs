use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {what} (expected {expected}, got {actual})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("reward {value} at arm {arm}, round {round} lies outside [0, 1]")]
    RewardOutOfRange { arm: usize, round: usize, value: f64 },

    #[error("baseline `{0}` needs auxiliary input that was not supplied")]
    MissingBaselineInput(&'static str),

    #[error("trace was recorded without log-probability gradients")]
    GradientsNotRecorded,

    #[error("instance has no unique best arm")]
    NonUniqueBestArm,

    #[error("non-finite gradient at iteration {iteration}")]
    NonFiniteGradient {
        iteration: usize,
        theta: Vec<f64>,
        gradient: Vec<f64>,
    },

    #[error("{0} must not be empty")]
    Empty(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
