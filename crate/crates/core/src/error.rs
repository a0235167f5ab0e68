use std::io;

/// Errors produced by the search pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("format error: {0}")]
    Format(#[from] FormatError),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("empty sequence")]
    EmptySequence,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    #[error("numeric overflow: {0}")]
    NumericOverflow(String),

    #[error("need {needed} candidates with a different label, only {available} available")]
    InsufficientCandidates { needed: usize, available: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Problems found while decoding one of the on-disk formats.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FormatError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: Vec<u8> },

    #[error("truncated payload in {context}")]
    Truncated { context: String },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("invalid field in {context}: {reason}")]
    Invalid { context: String, reason: String },

    #[error("line {line}: {reason}")]
    Line { line: usize, reason: String },

    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
