use thiserror::Error;

/// Errors raised anywhere in the workbench.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value at epoch {epoch}: {what}")]
    Numeric { epoch: usize, what: String },

    #[error("invalid quantum state: {0}")]
    State(String),

    #[error("degenerate steady state: {0}")]
    DegenerateSteadyState(String),

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error("integration blew up at t = {time}: {what}")]
    Integration { time: f64, what: String },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn state(msg: impl Into<String>) -> Self {
        Error::State(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
