use thiserror::Error;

use crate::expr::{EvalError, SyntaxError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),

    #[error(transparent)]
    Eval(#[from] EvalError),

    #[error("mesh error{}: {message}", element.map(|e| format!(" in element {e}")).unwrap_or_default())]
    Mesh {
        element: Option<usize>,
        message: String,
    },

    #[error("non-positive Jacobian {jacobian:e} in element {element} at (u, v) = ({u}, {v})")]
    Geometry {
        element: usize,
        u: f64,
        v: f64,
        jacobian: f64,
    },

    #[error("non-finite integrand at (u, v) = ({u}, {v})")]
    Integration { u: f64, v: f64 },

    #[error("connectivity error: {0}")]
    Connectivity(String),

    #[error("assembled {matrix} matrix is not symmetric (relative asymmetry {asymmetry:e})")]
    Asymmetric {
        matrix: &'static str,
        asymmetry: f64,
    },

    #[error("mass matrix is not positive definite (pivot {pivot} = {value:e})")]
    MassNotPositiveDefinite { pivot: usize, value: f64 },

    #[error("numerical consistency: {0}")]
    NumericalConsistency(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn mesh(element: impl Into<Option<usize>>, message: impl Into<String>) -> Self {
        Error::Mesh {
            element: element.into(),
            message: message.into(),
        }
    }
}
