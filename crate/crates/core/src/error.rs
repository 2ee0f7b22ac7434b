use crate::arbitrage::ArbitrageCertificate;
use crate::lp::LpError;
use crate::market_data::ValidationReport;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("quotes failed static validation ({} violations)", .0.violations.len())]
    Invalid(ValidationReport),
    #[error("{0} is outside the domain [0, {1}]")]
    OutOfDomain(f64, f64),
    #[error("index {index} out of range for {what} (len {len})")]
    Index {
        what: &'static str,
        index: usize,
        len: usize,
    },
    #[error("{0}")]
    NotConvex(String),
    #[error("atom at {0} is not a grid node")]
    OffGrid(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    /// The solver hit its iteration cap; feasibility is undecided.
    #[error("inconclusive: {0}")]
    Stalled(LpError),
    #[error("linear program error: {0}")]
    Lp(LpError),
    /// The quotes admit arbitrage on the grid; the certificate proves it.
    #[error("quotes admit arbitrage (gap {})", .0.gap)]
    Arbitrage(Box<ArbitrageCertificate>),
    #[error("internal consistency check failed: {0}")]
    Consistency(String),
}

impl From<LpError> for Error {
    fn from(e: LpError) -> Self {
        match e {
            LpError::Stalled(_) => Error::Stalled(e),
            other => Error::Lp(other),
        }
    }
}
