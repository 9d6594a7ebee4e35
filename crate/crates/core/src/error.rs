use thiserror::Error;

/// Errors produced by the channel model and the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("inner solver did not converge after {iterations} iterations (gap {gap:e} bits)")]
    InnerNonConvergence { iterations: usize, gap: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("kernel is reducible; closed classes {closed_classes:?}{hint}")]
    Reducible {
        closed_classes: Vec<Vec<usize>>,
        hint: &'static str,
    },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("budget {kappa} is infeasible; minimum achievable average cost is {minimum_cost}")]
    Infeasible { kappa: f64, minimum_cost: f64 },

    #[error("degenerate parameters: {0}")]
    Degenerate(String),
}

impl Error {
    /// True for failures of an iterative method to reach its tolerance.
    pub fn is_convergence_failure(&self) -> bool {
        matches!(self, Error::InnerNonConvergence { .. } | Error::NonConvergence { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
