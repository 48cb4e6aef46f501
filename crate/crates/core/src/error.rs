use thiserror::Error;

use crate::geometry::Point;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("coefficient matrix is not symmetric at {point}: a[0][1]={upper}, a[1][0]={lower}")]
    NonSymmetricCoefficient { point: Point, upper: f64, lower: f64 },

    #[error("non-finite {what} at {point}")]
    NonFinite { what: &'static str, point: Point },

    #[error("negative jump kernel value {value} at ({x}, {y})")]
    NegativeKernel { x: Point, y: Point, value: f64 },

    #[error("{0} coefficients cannot be simulated in continuous space; use the lattice chain")]
    UnsupportedCoefficients(&'static str),

    #[error("time step underflow: jump rate {rate} needs dt below {dt}")]
    StepUnderflow { rate: f64, dt: f64 },

    #[error("rejection sampler exhausted {proposals} proposals at state {state}")]
    RejectionExhausted { state: Point, proposals: usize },

    #[error("integral did not converge: {0}")]
    Divergent(String),

    #[error("grid has {nodes} nodes, above the cap of {cap}")]
    NodeCap { nodes: usize, cap: usize },

    #[error("scheme instability: heat row entry {value} at node {node}")]
    Instability { node: usize, value: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("linear solve stalled: relative residual {residual:e} after {iterations} iterations")]
    SolveStalled { residual: f64, iterations: usize },

    #[error("estimator failure: {0}")]
    Estimator(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
