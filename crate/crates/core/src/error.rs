use thiserror::Error;

use crate::exprlang::ExprError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    /// The eigenvalue tuple (or Λ-tuple of a Hessian) left the Garding cone.
    #[error("not admissible{}: {detail}", node.map(|n| format!(" at node {n}")).unwrap_or_default())]
    NotAdmissible { node: Option<usize>, detail: String },

    #[error("Jacobi iteration did not converge after {sweeps} sweeps (off-diagonal residual {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },

    #[error("expression error{}: {source}", node.map(|n| format!(" at node {n}")).unwrap_or_default())]
    Expr {
        node: Option<usize>,
        #[source]
        source: ExprError,
    },

    #[error("grid: {0}")]
    Grid(String),

    #[error("linear solver: {0}")]
    LinearSolve(String),

    #[error("line search stalled at iteration {iteration} (residual {residual:e})")]
    LineSearchStall { iteration: usize, residual: f64 },

    #[error("Newton iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NewtonMaxIter { iterations: usize, residual: f64 },

    #[error("continuation step fell below the floor; last good t = {last_t}")]
    Continuation { last_t: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<ExprError> for Error {
    fn from(source: ExprError) -> Self {
        Error::Expr { node: None, source }
    }
}

impl Error {
    pub(crate) fn at_node(self, node: usize) -> Self {
        match self {
            Error::Expr { source, .. } => Error::Expr {
                node: Some(node),
                source,
            },
            Error::NotAdmissible { detail, .. } => Error::NotAdmissible {
                node: Some(node),
                detail,
            },
            other => other,
        }
    }
}
