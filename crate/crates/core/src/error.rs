use crate::lang::ast::Pos;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("{pos}: syntax error: {msg}")]
    Syntax { pos: Pos, msg: String },
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("kind error in `{decl}`: {msg}")]
    Kind { decl: String, msg: String },
    #[error("causality error: {0}")]
    Causality(String),
    #[error("schedule error: cyclic instantaneous dependency through {0:?}")]
    Schedule(Vec<String>),
    #[error("type error: {0}")]
    Type(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("negative score {0} passed to factor")]
    NegativeScore(f64),
    #[error("undefined value escaped into {0}")]
    BottomEscape(&'static str),
    #[error("inconsistent stream environment: {0}")]
    Inconsistent(String),
    #[error("non-finite weight: {0}")]
    NonFinite(String),
    #[error("degenerate particle cloud at step {step}: all weights are zero")]
    Degenerate { step: u64 },
    #[error("grid budget exceeded: more than {0} cells")]
    Budget(u64),
    #[error("seed permutation mismatch: {0}")]
    Permutation(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub fn ty(msg: impl Into<String>) -> Self {
        Error::Type(msg.into())
    }

    pub fn kind(decl: &str, msg: impl Into<String>) -> Self {
        Error::Kind { decl: decl.to_string(), msg: msg.into() }
    }

    /// Errors detected before execution.
    pub fn is_static(&self) -> bool {
        matches!(
            self,
            Error::Syntax { .. } | Error::Unbound(_) | Error::Kind { .. } | Error::Schedule(_)
        )
    }
}
