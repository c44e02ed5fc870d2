use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// `what` names the pair of dimensions that disagree.
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    Dimension {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("insufficient data for {what}: need {required} samples, have {available}")]
    InsufficientData {
        what: String,
        required: usize,
        available: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite entry in {0}")]
    NonFinite(String),

    #[error("{0} did not converge")]
    NoConvergence(&'static str),

    #[error("input not persistently exciting: {0}")]
    NotExciting(String),

    #[error("zero Hankel matrix: no realizable dynamics")]
    ZeroHankel,

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("network spec: {0}")]
    Network(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn dim(what: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::Dimension {
            what: what.into(),
            expected,
            found,
        }
    }

    pub(crate) fn short(what: impl Into<String>, required: usize, available: usize) -> Self {
        Error::InsufficientData {
            what: what.into(),
            required,
            available,
        }
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
