use thiserror::Error;

/// Errors produced by assembly, functional calculus and solvers.
#[derive(Debug, Error)]
pub enum NelsonError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("ellipticity violated at node {node}: {detail}")]
    Ellipticity { node: usize, detail: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("dense eigendecomposition refused: dimension {dim} exceeds limit {limit}")]
    DenseLimit { dim: usize, limit: usize },

    #[error("singular functional calculus: f is not finite at eigenvalue {eigenvalue}")]
    Singularity { eigenvalue: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Fock basis dimension {dim} exceeds limit {limit}")]
    FockLimit { dim: usize, limit: usize },

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:.3e}, tol {tol:.3e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        tol: f64,
    },

    #[error("linear solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    CgNoConvergence { iterations: usize, residual: f64 },

    #[error("empty restriction: no electron node with |X| > {radius}")]
    EmptyRestriction { radius: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NelsonError>;
