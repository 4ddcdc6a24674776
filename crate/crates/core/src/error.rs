use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("numerical failure in {context}: {detail}")]
    Numerical { context: &'static str, detail: String },

    #[error("precondition violated in {context}: {detail}")]
    Precondition { context: &'static str, detail: String },

    /// The communication graph has no spanning tree rooted at the leader.
    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("simulation diverged at t = {t}: {detail}")]
    Divergence { t: f64, detail: String },

    #[error("Riccati solve failed for agent {agent} at t = {t}: {source}")]
    AgentRiccati {
        agent: usize,
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn dim(context: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::Dimension {
            context,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn numerical(context: &'static str, detail: impl Into<String>) -> Self {
        Error::Numerical {
            context,
            detail: detail.into(),
        }
    }
}
