use thiserror::Error;

/// Unified error type for the whole pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of range or inconsistent.
    #[error("config: {0}")]
    Config(String),

    /// Runtime input (shapes, label ranges, file contents) is invalid.
    #[error("input: {0}")]
    Input(String),

    /// A numeric computation produced a non-finite or impossible value.
    #[error("numeric: {0}")]
    Numeric(String),

    /// Training diverged; `epoch` is the first epoch whose loss was non-finite.
    #[error("training diverged at epoch {epoch}: {reason}")]
    Training { epoch: usize, reason: String },

    /// A metric has no defined value on this input (e.g. constant sequence).
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    /// An output directory holds results from an incompatible earlier run.
    #[error("resume conflict: {0}")]
    ResumeConflict(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code: 2 config/input, 3 numeric/training, 4 resume conflict.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Input(_) => 2,
            Error::Numeric(_) | Error::Training { .. } | Error::UndefinedMetric(_) => 3,
            Error::ResumeConflict(_) => 4,
            Error::Io(_) | Error::Serialization(_) => 1,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}
