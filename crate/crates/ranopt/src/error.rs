use thiserror::Error;

/// Errors reported by solvers, generators and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("singular matrix (pivot {pivot:e} at column {col})")]
    Singular { col: usize, pivot: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no sign change on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("instance too large: {count} candidates exceed guard {limit}")]
    TooLarge { count: f64, limit: f64 },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("experiment failed at sweep {sweep}, seed {seed}: {source}")]
    Experiment {
        sweep: f64,
        seed: u64,
        #[source]
        source: Box<Error>,
    },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
