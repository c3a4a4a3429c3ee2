use thiserror::Error;

/// Errors surfaced by the optimizer library.
#[derive(Debug, Error)]
pub enum Error {
    /// Bad arguments: dimension mismatches, non-finite inputs, invalid ranges.
    #[error("input error: {0}")]
    Input(String),

    /// Linear-algebra failure that survived jitter escalation.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Scheduler protocol violation (unknown job id, double completion).
    #[error("protocol error: {0}")]
    Protocol(String),

    /// Invalid or unreadable run configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Too many objective evaluations failed; the run was aborted.
    #[error("objective failure: {0}")]
    Objective(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub fn protocol(msg: impl Into<String>) -> Self {
        Error::Protocol(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
