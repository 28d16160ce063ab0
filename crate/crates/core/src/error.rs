use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("capacity error: {entries} entries exceeds budget of {budget}")]
    Capacity { entries: usize, budget: usize },

    #[error("convergence error: {0}")]
    Convergence(String),

    #[error("numerical error at cycle {cycle}: {message}")]
    Numerical { cycle: usize, message: String },

    #[error("sub-problem error: {0}")]
    SubProblem(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("ingestion error: {0}")]
    Ingestion(String),

    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn dim_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Dimension(msg.into()))
}
