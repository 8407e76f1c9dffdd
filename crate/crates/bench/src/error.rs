use greybox_core::GpError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, BenchError>;

impl BenchError {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 2,
            BenchError::Data(_) => 3,
            BenchError::Numerical(_) => 4,
            BenchError::Io(_) => 1,
        }
    }
}

impl From<GpError> for BenchError {
    fn from(e: GpError) -> Self {
        let msg = e.to_string();
        match e {
            GpError::InvalidHyperparameter { .. }
            | GpError::UnsupportedKernel(_)
            | GpError::InvalidConfig(_) => BenchError::Config(msg),
            GpError::DimensionMismatch { .. }
            | GpError::EmptyData
            | GpError::SeriesTooShort { .. }
            | GpError::NonUniformSampling
            | GpError::OutsideDomain(_) => BenchError::Data(msg),
            GpError::NonFinite(_)
            | GpError::Factorization { .. }
            | GpError::InnovationNotPositiveDefinite(_)
            | GpError::SingularPredictedCovariance(_)
            | GpError::Singular(_) => BenchError::Numerical(msg),
        }
    }
}

impl From<std::io::Error> for BenchError {
    fn from(e: std::io::Error) -> Self {
        BenchError::Io(e.to_string())
    }
}
