use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MhdError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids (n={left_n}, L={left_len} vs n={right_n}, L={right_len})")]
    GridMismatch {
        left_n: usize,
        left_len: f64,
        right_n: usize,
        right_len: f64,
    },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// The Picard iteration hit its cap; usually the time step is too large
    /// for the fixed-point map to contract.
    #[error("Picard iteration did not converge after {iters} iterations (residual {residual:.3e}){}", step.map(|s| format!(" at step {s}")).unwrap_or_default())]
    NonConvergence {
        iters: usize,
        residual: f64,
        step: Option<usize>,
    },

    /// A record consumer passed to a driver asked the run to stop.
    #[error("run aborted by record consumer: {0}")]
    Aborted(String),
}

impl MhdError {
    /// Attach the step index to a `NonConvergence` error.
    pub fn at_step(self, n: usize) -> Self {
        match self {
            MhdError::NonConvergence { iters, residual, .. } => MhdError::NonConvergence {
                iters,
                residual,
                step: Some(n),
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, MhdError>;
