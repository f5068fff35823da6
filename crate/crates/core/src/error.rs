use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the estimators, samplers and simulation drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("balance equation has no root in (0, {upper}]: lhs {lhs:e} < rhs {rhs:e}")]
    NoRoot { upper: f64, lhs: f64, rhs: f64 },

    #[error("bandwidth grid is empty (n = {n})")]
    EmptyGrid { n: usize },

    #[error("no candidate window passed the selection tests")]
    NoAdmissible,

    #[error("estimation point {x} lies outside the admissible range [{lo}, {hi}]")]
    OutOfRange { x: f64, lo: f64, hi: f64 },

    #[error("singular local system: {count} points for a degree-{kappa} fit")]
    SingularSystem { count: usize, kappa: usize },

    #[error("basis function {coordinate} has zero empirical norm in the window")]
    DegenerateNorm { coordinate: usize },

    #[error("ideal bandwidth undefined: {0}")]
    Undefined(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
