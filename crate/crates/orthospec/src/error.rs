use thiserror::Error;

/// Failure modes shared by every module.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A finite fraction or rational transform was evaluated on one of its poles.
    #[error("pole encountered at {location}")]
    Pole { location: String },

    /// An iterative procedure ran out of budget. The best estimate is kept.
    #[error("no convergence after {iterations} iterations (estimate {estimate}, error bound {bound:e})")]
    NoConvergence {
        estimate: String,
        bound: f64,
        iterations: usize,
    },

    /// The rate family has the wrong determinacy type for the requested operation.
    #[error("classification conflict: {0}")]
    Classification(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
