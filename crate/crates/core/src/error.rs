use thiserror::Error;

/// Errors produced by the modelling, estimation and I/O layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A quadrature or integrator failed to reach the requested tolerance.
    #[error("numerical failure in {context}: achieved error {achieved:e} (value {value:e})")]
    Numerical {
        context: String,
        value: f64,
        achieved: f64,
    },

    /// A response function was evaluated on (or numerically at) a pole.
    #[error("singular response at omega = {omega}: |denominator| = {magnitude:e}")]
    Singular { omega: f64, magnitude: f64 },

    /// Renormalised frequency squared is not positive.
    #[error("unphysical parameters: K^2 = {k_squared:e} <= 0")]
    Unphysical { k_squared: f64 },

    /// A fit cannot be performed on the supplied data.
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    /// Configuration could not be parsed or failed validation.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed input data.
    #[error("data error: {0}")]
    Data(String),

    /// Filesystem failure.
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
