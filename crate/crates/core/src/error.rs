use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Scenario or configuration file is invalid.
    #[error("config error: {0}")]
    Config(String),

    /// Input data (CSV rows, windows, batches) violates the expected schema.
    #[error("data error: {0}")]
    Data(String),

    /// Malformed CSV row.
    #[error("data error at line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("empty training set")]
    EmptyTrainingSet,

    /// Tensor shapes do not agree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Training produced a NaN or infinite value.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
