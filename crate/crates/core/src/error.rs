use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("fields live on different meshes")]
    MeshMismatch,

    #[error("size mismatch: expected {expected}, got {actual} ({what})")]
    SizeMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite sample {value} at x = {x}")]
    NonFinite { x: f64, value: f64 },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "time-step constraint violated: omega * tau = {omega} * {tau} = {product} > 1 - delta0 = {bound}"
    )]
    TimeStepConstraint {
        omega: f64,
        tau: f64,
        product: f64,
        bound: f64,
    },

    #[error("singular linear system: zero pivot at row {row}")]
    SingularSystem { row: usize },

    #[error(
        "fixed-point iteration did not converge at step {step} after {iterations} iterations (last update {residual:e})"
    )]
    FixedPointDivergence {
        step: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("no steady state after {steps} steps (last first-iterate update {last_update:e})")]
    NoSteadyState { steps: usize, last_update: f64 },

    #[error("step {step}: {source}")]
    StepFailed { step: usize, source: Box<Error> },

    #[error("coefficients are not of aggregate shape: {0}")]
    NotAggregateShape(String),
}

pub type Result<T> = std::result::Result<T, Error>;
