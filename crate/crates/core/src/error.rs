use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A single violated parameter invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {}", join(.0))]
    InvalidParams(Vec<Violation>),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("unknown config keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite state at t = {t}: {context}")]
    NonFinite { t: f64, context: String },

    #[error("step size underflow at t = {t} (h = {step:e})")]
    StepUnderflow { t: f64, step: f64 },

    #[error("covariance became unphysical at t = {t}: min eigenvalue {min_eigenvalue:e}, symmetric defect {symmetric_defect:e}")]
    Unphysical {
        t: f64,
        min_eigenvalue: f64,
        symmetric_defect: f64,
    },

    #[error("phase variance undefined: n_m = {n_m:e}, n_d = {n_d:e}")]
    UndefinedVariance { n_m: f64, n_d: f64 },

    #[error("numerical degeneracy: {0}")]
    Degenerate(String),

    #[error("mismatch: {0}")]
    Mismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn join(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
