//! Error type shared across the solver library.

use thiserror::Error;

/// Errors produced by parsing, validation, and the solver pipeline.
#[derive(Debug, Error)]
pub enum SolverError {
    /// Input text did not conform to the game-file grammar.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A domain invariant was violated (probabilities, shapes, preconditions).
    #[error("invariant violation: {0}")]
    Invariant(String),

    /// A configured resource budget would be exceeded.
    #[error("resource cap exceeded: {what} requires {required}, cap is {cap}")]
    Resource {
        what: String,
        required: usize,
        cap: usize,
    },

    /// The LP routine or a numerical certificate failed.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl SolverError {
    pub fn invariant(msg: impl Into<String>) -> Self {
        SolverError::Invariant(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        SolverError::Numerical(msg.into())
    }

    /// Process exit code used by the CLI for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            SolverError::Parse { .. } => 2,
            SolverError::Resource { .. } => 3,
            SolverError::Invariant(_) => 4,
            SolverError::Numerical(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, SolverError>;
