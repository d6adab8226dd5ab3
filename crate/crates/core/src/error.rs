use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("embedding provider error: {0}")]
    Provider(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("memory holds no event nodes")]
    EmptyMemory,
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),
    #[error("unknown {kind} strategy `{name}` (known: {known})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        known: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
