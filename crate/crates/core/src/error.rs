use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidModel(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid does not match model: {0}")]
    GridMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("function is identically zero")]
    ZeroFunction,

    #[error("negative nodal value {value} at node {index}")]
    NegativeValue { index: usize, value: f64 },

    #[error("no start converged ({starts} attempted)")]
    NoStartConverged { starts: usize },

    #[error("requested {requested} eigenpairs but only {available} are available")]
    ModesOutOfRange { requested: usize, available: usize },

    #[error("kernel threshold splits a near-degenerate cluster (gap ratio {gap_ratio:.3e} < 10)")]
    ClusterSplit { gap_ratio: f64 },

    #[error("kernel is trivial; the critical point is nondegenerate")]
    TrivialKernel,

    #[error("|phi| = {norm:.3e} exceeds chart radius {radius:.3e}")]
    OutsideChart { norm: f64, radius: f64 },

    #[error("Newton iteration for the correction failed after {iterations} steps (residual {residual:.3e})")]
    NewtonFailed { iterations: usize, residual: f64 },

    #[error("Hessian restricted to the complement is numerically singular")]
    SingularHessian,

    #[error("energy gap below noise floor: {0}")]
    BelowNoiseFloor(String),

    #[error("insufficient data for fit: {0}")]
    InsufficientData(String),

    #[error("fit rejected: r2 = {r2:.6} below {min_r2}")]
    FitRejected { r2: f64, min_r2: f64 },

    #[error("minimizer family is empty")]
    EmptyFamily,

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),
}
