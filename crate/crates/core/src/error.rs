use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("balance constraint violated: pa+(1-p)b = {row1}, pb+(1-p)c = {row2} (tolerance {tolerance:e})")]
    BalanceViolated {
        row1: f64,
        row2: f64,
        tolerance: f64,
    },

    #[error("{what} exceeds budget of {limit}")]
    BudgetExceeded { what: &'static str, limit: usize },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag used by the command-line error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::BalanceViolated { .. } => "balance-violated",
            Error::BudgetExceeded { .. } => "budget-exceeded",
            Error::Precondition(_) => "precondition",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
