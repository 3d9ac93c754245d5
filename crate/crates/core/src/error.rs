use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at `{key}`: {message}")]
    Parse { key: String, message: String },

    #[error("transition function is not total: missing {key}")]
    Totality { key: String },

    #[error("discount factor must be an integer ≥ 2 (got {found})")]
    Gamma { found: String },

    #[error("reward vector at `{key}` has {found} entries, expected {expected}")]
    Arity {
        key: String,
        expected: usize,
        found: usize,
    },

    #[error("invalid lasso: {0}")]
    InvalidLasso(String),

    #[error("payoff vector {0}")]
    PayoffOutOfRange(String),

    #[error("invalid goal for agent {agent}: {message}")]
    Goal { agent: usize, message: String },

    #[error("letter {letter} outside comparator alphabet [-{mu}, {mu}]")]
    Alphabet { letter: i64, mu: i64 },

    #[error("explored-state budget exhausted after {explored} product states (cap {cap})")]
    Budget { explored: usize, cap: usize },

    #[error("game too large for positional enumeration: {0}")]
    OracleTooLarge(String),

    #[error("epsilon must be positive (got {0})")]
    Epsilon(String),

    #[error("horizon {horizon} exceeds the certification budget ({cap})")]
    Horizon { horizon: usize, cap: usize },

    #[error("malformed witness: {0}")]
    Witness(String),

    #[error("internal soundness failure: {0}")]
    Soundness(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            key: key.into(),
            message: message.into(),
        }
    }
}
