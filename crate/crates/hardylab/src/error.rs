use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("tolerance not met: {what} (achieved estimate {achieved:e}, requested {requested:e})")]
    Tolerance {
        what: String,
        achieved: f64,
        requested: f64,
    },
    #[error("panel budget of {budget} exhausted (error estimate {estimate:e})")]
    Budget { budget: usize, estimate: f64 },
    #[error("spectral truncation insufficient: tail bound {achieved:e} exceeds {requested:e}")]
    TruncationInsufficient { achieved: f64, requested: f64 },
    #[error("derivative order {order} unsupported (max {max})")]
    UnsupportedOrder { order: usize, max: usize },
    #[error("no closed-form kernel for {0}")]
    UnsupportedClosedForm(String),
    #[error("unsupported parameters: {0}")]
    UnsupportedParameters(String),
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
