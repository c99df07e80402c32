use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A distribution or weight was constructed with invalid parameters.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The quantile at 0 or 1 is infinite for this distribution.
    #[error("quantile at u={0} is unbounded")]
    UnboundedQuantile(f64),

    /// An integral or moment required by the operation is infinite.
    #[error("divergent integral: {0}")]
    Divergent(String),

    /// The mean is zero (or numerically indistinguishable from it).
    #[error("degenerate mean: {0}")]
    DegenerateMean(f64),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::UnboundedQuantile(_) => "unbounded_quantile",
            Error::Divergent(_) => "divergent",
            Error::DegenerateMean(_) => "degenerate_mean",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_prob_open(name: &str, p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must lie in (0,1), got {p}")))
    }
}

pub(crate) fn check_prob_closed(name: &str, u: f64) -> Result<()> {
    if (0.0..=1.0).contains(&u) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must lie in [0,1], got {u}")))
    }
}
