use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("mode {mode} out of range for a tensor with {ndim} modes")]
    ModeOutOfRange { mode: usize, ndim: usize },

    #[error("invalid tensor shape: {0}")]
    InvalidShape(String),

    #[error("rank chain violation: {0}")]
    RankChain(String),

    #[error("subspace is not orthonormal (max |U^T U - I| = {0:e})")]
    NotOrthonormal(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty data: {0}")]
    EmptyData(String),

    #[error("malformed model file: {0}")]
    Format(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
}

impl Error {
    pub fn io(context: impl Into<String>, source: io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Prefixes the message with `ctx`. I/O errors extend their context instead.
    pub fn context(self, ctx: impl std::fmt::Display) -> Self {
        let pre = |m: String| format!("{ctx}: {m}");
        match self {
            Error::DimensionMismatch(m) => Error::DimensionMismatch(pre(m)),
            Error::InvalidShape(m) => Error::InvalidShape(pre(m)),
            Error::RankChain(m) => Error::RankChain(pre(m)),
            Error::InvalidConfig(m) => Error::InvalidConfig(pre(m)),
            Error::EmptyData(m) => Error::EmptyData(pre(m)),
            Error::Format(m) => Error::Format(pre(m)),
            Error::Parse(m) => Error::Parse(pre(m)),
            Error::Numeric(m) => Error::Numeric(pre(m)),
            Error::Io { context, source } => Error::Io {
                context: pre(context),
                source,
            },
            other @ (Error::ModeOutOfRange { .. } | Error::NotOrthonormal(_)) => other,
        }
    }

    /// Process exit code used by the `ttss` binary: 1 usage, 2 data, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) => 1,
            Error::Numeric(_) | Error::NotOrthonormal(_) => 3,
            _ => 2,
        }
    }
}
