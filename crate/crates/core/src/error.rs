use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
}

impl Error {
    /// Stable machine-readable category, used by the CLI for error reports.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InsufficientData(_) => "insufficient-data",
            Error::DimensionMismatch(_) => "dimension-mismatch",
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::RankDeficient(_) | Error::Singular(_) | Error::NotConverged { .. } => {
                "numerical"
            }
            Error::NonFinite(_) => "numerical",
        }
    }
}

pub(crate) fn ensure_dims(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(msg()))
    }
}
