use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite value while evaluating {context}")]
    NonFinite { context: String },

    #[error("could not bracket root for {context} within {doublings} doublings")]
    BracketFailure { context: String, doublings: usize },

    #[error("pair count {pairs} exceeds dense capacity {capacity}")]
    CapacityExceeded { pairs: u64, capacity: u64 },

    #[error("singular term evaluated at non-positive value u[{index}] with eps = 0")]
    SingularEvaluation { index: usize },

    #[error("no convergence after {iterations} iterations (projected gradient {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("certification failed: {0}")]
    CertificationFailure(String),

    #[error("no closed form for {0}")]
    UnsupportedKind(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    pub(crate) fn non_finite(context: impl Into<String>) -> Self {
        Error::NonFinite {
            context: context.into(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
