use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("unknown chain `{name}`; valid chains: {valid}")]
    UnknownChain { name: String, valid: String },

    #[error("AR polynomial is not stationary (reflection coefficient {coefficient} at order {order})")]
    NonStationary { order: usize, coefficient: f64 },

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite {quantity} at path {path}, echelon E{echelon}, period {period}")]
    NonFinite {
        quantity: &'static str,
        path: usize,
        /// 1-based, matching report labels
        echelon: usize,
        /// 1-based
        period: usize,
    },

    #[error("unknown registry category `{0}`; valid: demand, policy, cost, forecaster, metric")]
    UnknownCategory(String),

    #[error("unknown {category} `{name}`; registered: {registered}")]
    UnknownComponent {
        category: String,
        name: String,
        registered: String,
    },

    #[error("{category} `{name}` is already registered")]
    DuplicateRegistration { category: String, name: String },

    #[error("invalid registry name `{0}`: names must match [a-z0-9_]+")]
    InvalidName(String),

    #[error("{0} is registered as a hook but has no implementation in this build")]
    Unavailable(String),

    #[error("need at least {needed} paths, got {got}")]
    InsufficientPaths { needed: usize, got: usize },

    #[error("catalog metadata mismatch: {0}")]
    Catalog(String),

    #[error("failed to parse {what}: {reason}")]
    Parse { what: String, reason: String },

    #[error("{context}: {source}")]
    Simulation {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(what: impl Into<String>, reason: impl ToString) -> Self {
        Error::Parse {
            what: what.into(),
            reason: reason.to_string(),
        }
    }
}
