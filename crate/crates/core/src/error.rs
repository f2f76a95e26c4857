use thiserror::Error;

/// Errors raised by the constructive routines.
///
/// Precondition failures always name the offending parameter so the CLI can
/// surface them verbatim.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid `{param}`: {reason}")]
    Domain { param: &'static str, reason: String },

    #[error("integrand is not finite at node {node:?}")]
    NonFinite { node: Vec<f64> },

    #[error("underdetermined fit: {samples} samples for {unknowns} unknowns")]
    Underdetermined { samples: usize, unknowns: usize },

    #[error("quadrature did not converge: {0}")]
    Convergence(String),

    #[error("unit {index}: {reason}")]
    Unit { index: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(param: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            param,
            reason: reason.into(),
        }
    }

    /// True for errors caused by caller-supplied parameters.
    pub fn is_precondition(&self) -> bool {
        matches!(
            self,
            Error::Domain { .. } | Error::Underdetermined { .. } | Error::Unit { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
