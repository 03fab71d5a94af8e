use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("mollifier width {epsilon} is below twice the mesh {mesh}")]
    UnresolvedMollifier { epsilon: f64, mesh: f64 },
    #[error("kernel evaluated at its singular point")]
    SingularPoint,
    #[error("quadrature missed its target: estimated relative error {estimate:e}")]
    QuadratureFailure { estimate: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("iteration cap of {iterations} reached with relative residual {residual:e}")]
    MaxIterations { iterations: usize, residual: f64 },
    #[error("fixed point iteration diverged after {iterations} steps (ratio {ratio})")]
    Diverged { iterations: usize, ratio: f64 },
    #[error("eigensolver converged {converged} of {requested} pairs")]
    NoConvergence { converged: usize, requested: usize },
    #[error("bump geometry: {0}")]
    GeometryError(String),
    #[error("only {exceedances} exceedances at the largest usable threshold")]
    InsufficientTailMass { exceedances: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
