use thiserror::Error;

/// Errors raised by the survcheck library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    MalformedRow { line: usize, message: String },

    #[error("missing column `{0}` in header")]
    MissingColumn(&'static str),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("dataset needs at least {required} rows, found {found}")]
    TooFewRows { required: usize, found: usize },

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("dataset has no censored records; censor-defined intervals need at least one")]
    NoCensors,

    #[error("dataset has no events; {0}")]
    NoEvents(&'static str),

    #[error("time grid must be strictly increasing and non-negative")]
    NonMonotoneGrid,

    #[error("invalid parameters for {family}: {message}")]
    InvalidParameters { family: &'static str, message: String },

    #[error("unknown model family `{0}`; expected one of: exponential, weibull, gamma, generalised-gamma, gompertz, log-logistic, log-normal")]
    UnknownFamily(String),

    #[error("model survival is zero at t = {0}; conditional interval probability undefined")]
    DegenerateInterval(f64),

    #[error("observed count {observed} outside distribution support 0..={max}")]
    OutsideSupport { observed: u64, max: u64 },

    #[error("invalid probability {0}")]
    InvalidProbability(f64),

    #[error("{0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
