use thiserror::Error;

/// Errors shared by every module of the crate.
///
/// `Usage` covers violated preconditions (wrong lengths, unmet lemma
/// hypotheses, malformed inputs). `Internal` is reserved for outcomes that a
/// proven statement rules out; seeing one means the implementation is wrong.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error("resource error: {0}")]
    Resource(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }

    pub fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A single finding from one of the validators. `clause` is the label of the
/// failing requirement, `detail` a human readable explanation.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Diagnostic {
    pub clause: String,
    pub detail: String,
}

impl Diagnostic {
    pub fn new(clause: impl Into<String>, detail: impl Into<String>) -> Self {
        Diagnostic {
            clause: clause.into(),
            detail: detail.into(),
        }
    }
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.clause, self.detail)
    }
}
