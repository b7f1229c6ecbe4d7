use thiserror::Error;

/// Broad failure classes; the command-line front end maps these onto exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
    Resource,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("resource error: {0}")]
    Resource(String),

    #[error("non-stoquastic: off-diagonal H[{row},{col}] = {value:e} exceeds tolerance {tol:e}")]
    NonStoquastic {
        row: usize,
        col: usize,
        value: f64,
        tol: f64,
    },

    #[error("degenerate ground state: gap {gap:e} within {threshold:e}")]
    DegenerateGroundState { gap: f64, threshold: f64 },

    #[error("reducible off-diagonal graph: {components} disconnected sectors")]
    Reducible { components: usize },

    #[error("ill-conditioned logarithm: positivity margin {margin:e}")]
    IllConditionedLog { margin: f64 },

    #[error(
        "mapping precondition violated: detailed-balance residual {residual:e} exceeds {tol:e}"
    )]
    DetailedBalance { residual: f64, tol: f64 },

    #[error("degenerate stationary state: lambda_1 = {lambda1:e}")]
    DegenerateStationary { lambda1: f64 },

    #[error("no convergence after {iterations} iterations (best residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Validation(_) | Error::Io(_) => ErrorKind::Validation,
            Error::Resource(_) => ErrorKind::Resource,
            _ => ErrorKind::Numerical,
        }
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
