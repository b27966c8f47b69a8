use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter or configuration value violates a precondition.
    #[error("configuration error: {0}")]
    Config(String),

    /// An estimator hit a division by an exact zero it is not allowed to patch.
    #[error("estimator failure: {0}")]
    Estimator(String),

    /// Not enough observations to form the cross-validation folds.
    #[error("cross-validation needs at least 15 observations, got {0}")]
    TooFewObservations(usize),

    /// The rate calculator has no closed form for this smoothness combination.
    #[error("unsupported rate case: {0}")]
    UnsupportedRateCase(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
