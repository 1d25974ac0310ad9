use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degree m must be at least 2, got {0}")]
    DegreeTooSmall(u32),

    #[error("derivative order k={k} outside 0..={k_max}")]
    OrderOutOfRange { k: u32, k_max: u32 },

    #[error("index n={n} outside 0..={max} for k={k}")]
    IndexOutOfRange { k: u32, n: usize, max: usize },

    #[error("precision of {got} bits is below the minimum of {min}")]
    PrecisionTooLow { got: u32, min: u32 },

    #[error("insufficient precision at {bits} bits: {detail}")]
    InsufficientPrecision { bits: u32, detail: String },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    /// An oracle's internal consistency assertion failed. Always a bug.
    #[error("oracle invariant broken: {0}")]
    OracleInvariant(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("need at least {need} records, got {got}")]
    TooFewRecords { need: usize, got: usize },

    #[error("unsupported function spec: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_degree(m: u32) -> Result<()> {
    if m < 2 {
        Err(Error::DegreeTooSmall(m))
    } else {
        Ok(())
    }
}
