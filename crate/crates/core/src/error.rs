use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("full-duplex split out of range: rx={rx} with {n_total} antennas (need 1 <= rx <= {max})")]
    FdSplitOutOfRange { n_total: usize, rx: usize, max: usize },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("empty search domain: {0}")]
    EmptyDomain(String),

    #[error("slope fit unstable: r^2 = {r_squared:.6} below {threshold}")]
    FitUnstable { r_squared: f64, threshold: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
