use std::fmt;

use ew_core::Error;

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PROVIDER: i32 = 3;
pub const EXIT_EMPTY_MEMORY: i32 = 4;
pub const EXIT_UNRESOLVED_GOLD: i32 = 5;
pub const EXIT_NO_EDGES: i32 = 6;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }

    pub fn parse(message: impl Into<String>) -> Self {
        Self::new(EXIT_USAGE, message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidInput(_) | Error::Config(_) | Error::UnknownStrategy { .. } | Error::Io(_) => {
                EXIT_USAGE
            }
            Error::Provider(_) => EXIT_PROVIDER,
            Error::EmptyMemory => EXIT_EMPTY_MEMORY,
            Error::UndefinedMetric(_) => EXIT_FAILURE,
        };
        CliError::new(code, e.to_string())
    }
}
