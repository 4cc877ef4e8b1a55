use std::io;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("degenerate design")]
    DegenerateDesign,

    #[error("under-complete dictionary: r = {r} must exceed max(p, q) = {max_pq}")]
    UnderComplete { r: usize, max_pq: usize },

    #[error("dead codes: lambda too large")]
    DeadCodes,

    #[error("divergence: objective became non-finite")]
    Divergence,

    #[error("aaw divergence: reduce step")]
    AawDivergence,

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("graph node {0} has no neighbors")]
    IsolatedNode(usize),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("matrix is singular")]
    Singular,

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// True for failures of the numerical routines, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Divergence
                | Error::AawDivergence
                | Error::DeadCodes
                | Error::NotPositiveDefinite
                | Error::Singular
                | Error::DegenerateDesign
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
