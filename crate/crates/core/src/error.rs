use thiserror::Error;

/// Errors raised by the recovery library and CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("format error: {0}")]
    Format(String),
    /// Parameters fall outside the range where a bound is meaningful.
    #[error("regime error: {0}")]
    Regime(String),
    /// Exhaustive routines refuse instances past their size guard.
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error("decomposition error: {0}")]
    Decomposition(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Format(_) => 3,
            Error::Regime(_) => 4,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
