//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SsnsError {
    /// An argument fell outside the mathematical domain of an operation.
    #[error("domain error in {op}: {msg}")]
    Domain { op: &'static str, msg: String },

    /// Two fields (or a field and a grid) that must share a grid do not.
    #[error("grid mismatch in {op}: {msg}")]
    GridMismatch { op: &'static str, msg: String },

    /// A documented precondition was violated by the input data.
    #[error("precondition violated in {op}: {msg}")]
    Precondition { op: &'static str, msg: String },

    /// A field contains NaN or infinite entries.
    #[error("non-finite values produced by {op}")]
    NonFinite { op: &'static str },

    /// The iteration ledger broke its certified majorant.
    #[error(
        "iteration bound violated at step {step}: measured K = {measured:.6e} \
         exceeds majorant {majorant:.6e}"
    )]
    RecurrenceViolation {
        step: usize,
        measured: f64,
        majorant: f64,
    },

    /// Time stepping became non-finite; the last healthy state is reported.
    #[error("solver state became non-finite at step {step} (tau = {tau:.6})")]
    BlowUp { step: usize, tau: f64 },

    /// A numerical tolerance or convergence target was not met.
    #[error("numerical failure in {op}: {msg}")]
    Numerical { op: &'static str, msg: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed binary container or CSV payload.
    #[error("format error: {0}")]
    Format(String),
}

impl SsnsError {
    pub fn domain(op: &'static str, msg: impl Into<String>) -> Self {
        SsnsError::Domain {
            op,
            msg: msg.into(),
        }
    }

    pub fn precondition(op: &'static str, msg: impl Into<String>) -> Self {
        SsnsError::Precondition {
            op,
            msg: msg.into(),
        }
    }

    pub fn numerical(op: &'static str, msg: impl Into<String>) -> Self {
        SsnsError::Numerical {
            op,
            msg: msg.into(),
        }
    }
}
