use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid support window: {0}")]
    InvalidWindow(String),

    #[error("observation {index} is inconsistent with the support window: {reason}")]
    InvalidObservation { index: usize, reason: String },

    #[error("no observations supplied")]
    EmptySample,

    #[error("age {age} is outside the admissible range {lo}..={hi}")]
    AgeOutOfRange { age: u32, lo: u32, hi: u32 },

    #[error("hazard model: {0}")]
    Hazard(String),

    #[error("variance undefined at ages {0:?} (empty risk set)")]
    UndefinedVariance(Vec<u32>),

    #[error("depreciation curve has no value at age {0}")]
    MissingCurvePoint(u32),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("contract `{id}` cannot be priced: {source}")]
    Contract {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("row {row}: {message}")]
    Row { row: usize, message: String },

    #[error("{} data error(s); first: {}", .0.len(), .0.first().map(String::as_str).unwrap_or(""))]
    Data(Vec<String>),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
