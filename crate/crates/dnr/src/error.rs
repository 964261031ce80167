use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error at {field}: {message}")]
    Validation { field: String, message: String },
    #[error("network graph is disconnected")]
    DisconnectedGraph,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("line selection is not a radial (spanning tree) configuration")]
    NotRadial,
    #[error("spanning tree count exceeds cap {cap} (at least {count} trees)")]
    CapExceeded { cap: usize, count: usize },
    #[error("power flow did not converge: {0}")]
    NoConvergence(String),
    #[error("maximum iterations reached")]
    MaxIter,
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("input multipliers do not satisfy the auxiliary KKT system (residual {residual:.3e})")]
    NotOptimalInput { residual: f64 },
    #[error("direction LP failed: {0}")]
    LpFailure(String),
    #[error("all per-topology solves failed")]
    AllSolvesFailed,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
