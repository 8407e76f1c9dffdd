use thiserror::Error;

pub type Result<T> = std::result::Result<T, GpError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GpError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid hyperparameter `{name}` = {value}")]
    InvalidHyperparameter { name: &'static str, value: f64 },

    #[error("empty dataset")]
    EmptyData,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("covariance factorization failed even with jitter {jitter:e}")]
    Factorization { jitter: f64 },

    #[error("unsupported kernel: {0}")]
    UnsupportedKernel(&'static str),

    #[error("series too short: need more than {needed} samples, got {actual}")]
    SeriesTooShort { needed: usize, actual: usize },

    #[error("timestamps are not uniformly sampled")]
    NonUniformSampling,

    #[error("point {0:?} lies outside the domain")]
    OutsideDomain(Vec<f64>),

    #[error("innovation covariance is not positive definite at step {0}")]
    InnovationNotPositiveDefinite(usize),

    #[error("predicted covariance is singular at step {0}")]
    SingularPredictedCovariance(usize),

    #[error("singular matrix: {0}")]
    Singular(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
