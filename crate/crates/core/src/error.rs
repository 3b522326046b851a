use crate::functional::State;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, VortexError>;

#[derive(Debug, Error)]
pub enum VortexError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: expected {expected} entries, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("non-finite value in {term}")]
    Evaluation { term: &'static str },

    #[error("point out of range: {0}")]
    Range(String),

    #[error("mountain-pass geometry failure: {0}")]
    Geometry(String),

    #[error("no convergence after {iterations} iterations (gradient norm {grad_norm:.3e})")]
    NonConvergence {
        iterations: usize,
        grad_norm: f64,
        best: Box<State>,
    },

    #[error("line search stalled at iteration {iterations} (gradient norm {grad_norm:.3e})")]
    Stagnation {
        iterations: usize,
        grad_norm: f64,
        best: Box<State>,
    },

    #[error("singular linear system at pivot {0}")]
    Singular(usize),

    #[error("shooting oracle failed: {0}")]
    Oracle(String),

    #[error("at eps = {eps:e}: {source}")]
    AtEps {
        eps: f64,
        #[source]
        source: Box<VortexError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed profile: {0}")]
    Parse(String),
}

impl VortexError {
    pub(crate) fn at_eps(self, eps: f64) -> Self {
        VortexError::AtEps {
            eps,
            source: Box::new(self),
        }
    }

    /// Strips any `AtEps` annotations.
    pub fn root(&self) -> &VortexError {
        match self {
            VortexError::AtEps { source, .. } => source.root(),
            other => other,
        }
    }
}
