//! Crate-wide error type.
//!
//! Two broad classes matter to callers: I/O or format problems when reading
//! and writing artifact files, and contract violations where an argument or
//! a piece of data fails a documented precondition. The CLI maps the former
//! and latter onto distinct exit codes, so the distinction is kept explicit
//! here instead of collapsing everything into strings.

use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    /// A file did not parse as the format its reader expects.
    #[error("malformed {format} data: {detail}")]
    Format { format: &'static str, detail: String },

    /// An argument or dataset violated a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Training left the numeric domain (NaN or infinite loss).
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },

    /// An interpreted program exceeded its step budget.
    #[error("program exceeded step budget of {budget} steps")]
    StepBudget { budget: u64 },
}

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn format(format: &'static str, detail: impl Into<String>) -> Self {
        Error::Format { format, detail: detail.into() }
    }
}
