use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("matrix is not positive definite: {0}")]
    SingularMatrix(String),

    #[error("symbol vector has a zero entry at subcarrier {0}")]
    SingularSymbol(usize),

    #[error("matrix is not Hermitian (max asymmetry {0:e})")]
    NonHermitian(f64),

    #[error("residual power must be positive, got {0:e}")]
    NonPositiveResidual(f64),

    #[error("trial {index}: {source}")]
    Trial {
        index: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
