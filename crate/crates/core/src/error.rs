use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("state index ({row}, {col}) out of range for dimension {dim}")]
    IndexOutOfRange { row: usize, col: usize, dim: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unknown drive channel {0}")]
    UnknownChannel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite density matrix entry at t = {t} a.u. (step {step}); reduce dt")]
    NonFinite { t: f64, step: usize },

    #[error("empty time grid")]
    EmptyGrid,

    #[error(
        "integration window too short: residual excited population {residual:.3e} exceeds \
         {limit:.3e} at t_end = {t_end} a.u."
    )]
    Truncation { residual: f64, limit: f64, t_end: f64 },

    #[error("series is not uniformly sampled (sample {index})")]
    NonUniformSampling { index: usize },

    #[error("scan point T = {delay_fs} fs failed: {source}")]
    ScanPoint {
        delay_fs: f64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
