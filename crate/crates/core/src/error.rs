use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid value for `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("iteration did not converge after {iterations} iterations (last residual {residual:.3e})")]
    IterationFailure {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("shooting failed: {0}")]
    Shooting(String),

    #[error("inconsistent inputs: {0}")]
    Consistency(String),

    #[error("operator assembly failed: {0}")]
    Assembly(String),

    #[error("eigensolver failure: {message} (condition estimate {condition:.3e})")]
    Eigen { message: String, condition: f64 },

    #[error("no neutral point bracketed for R in [{lo}, {hi}] at k = {k}")]
    Bracketing { k: f64, lo: f64, hi: f64 },

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
