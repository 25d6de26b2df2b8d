use thiserror::Error;

/// Errors raised anywhere in the laboratory.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("hypergeometric series did not converge within {terms} terms (x = {x})")]
    SeriesNonConvergence { terms: usize, x: f64 },

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("no root of h_{{p,d}} found in (0, pi] for p = {p}, d = {d}")]
    RootNotFound { p: f64, d: usize },

    #[error("dimension mismatch: domain has dimension {expected}, point has {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("point lies outside the domain")]
    OutsideDomain,

    #[error("all {n} particles hit the boundary within one step at t = {t}")]
    SimultaneousExtinction { n: usize, t: f64 },

    #[error("particle at index {index} is outside the histogram grid")]
    OutsideGrid { index: usize },

    #[error("unsupported domain for {0}")]
    UnsupportedDomain(&'static str),

    #[error("censored fraction {fraction:.3} exceeds cap {cap:.3}; tail fit is invalid")]
    InvalidFit { fraction: f64, cap: f64 },

    #[error("config: {field}: {message}")]
    Config { field: String, message: String },

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
