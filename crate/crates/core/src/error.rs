use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("finite-difference oracle failed: {0}")]
    OracleFailure(String),

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("malformed {what}: {message}")]
    Format { what: &'static str, message: String },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn format(what: &'static str, msg: impl Into<String>) -> Self {
        Error::Format {
            what,
            message: msg.into(),
        }
    }

    /// Wraps a divergence with the phase it happened in; other errors pass through.
    pub fn in_phase(self, phase: &str) -> Self {
        match self {
            Error::Divergence(msg) => Error::Divergence(format!("{phase}: {msg}")),
            other => other,
        }
    }
}
