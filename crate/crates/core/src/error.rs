use thiserror::Error;

/// Errors raised by the simulator.
///
/// Runtime misclassification is never an error: it is recorded in slot
/// outcomes and aggregated by the metrics layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A physical or numerical parameter is outside its valid domain.
    #[error("parameter error: {0}")]
    Parameter(String),
    /// A caller broke an input contract (empty series, length mismatch, bad index).
    #[error("contract error: {0}")]
    Contract(String),
    /// A configuration is inconsistent or a resource it declared ran out.
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn configuration(msg: impl Into<String>) -> Self {
        Error::Configuration(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Io(err.to_string())
    }
}
