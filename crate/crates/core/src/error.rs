use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum HomogError {
    #[error("unsupported dimension: d = {0} (expected 1 or 2)")]
    UnsupportedDimension(usize),

    #[error("grid too coarse: {axis} has {n} points, need at least {min}")]
    GridTooSmall {
        axis: &'static str,
        n: usize,
        min: usize,
    },

    #[error("invalid grid function: {0}")]
    InvalidGridFunction(String),

    #[error("ellipticity violated: {0}")]
    EllipticityViolated(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("mean-zero violation: |mean| = {mean:.3e} exceeds tolerance {tol:.3e} (component {component})")]
    MeanZeroViolation {
        component: usize,
        mean: f64,
        tol: f64,
    },

    #[error("time-periodic fixed point did not converge in {periods} periods (last increment {increment:.3e})")]
    PeriodicNonConvergence { periods: usize, increment: f64 },

    #[error("linear solver did not converge: residual {residual:.3e} after {iterations} iterations")]
    LinearSolverFailed { iterations: usize, residual: f64 },

    #[error("dual corrector identity violated: {0}")]
    DualIdentityViolated(String),

    #[error("resolution budget exceeded: need {required_nodes} nodes x {required_steps} steps (limits {max_nodes} nodes, {max_node_steps} node-steps)")]
    ResolutionBudgetExceeded {
        required_nodes: usize,
        required_steps: usize,
        max_nodes: usize,
        max_node_steps: usize,
    },

    #[error("time ordering: evaluation time {t} must exceed pole time {s}")]
    TimeOrdering { t: f64, s: f64 },

    #[error("insufficient padding for smoothing: {0}")]
    InsufficientPadding(String),

    #[error("lattice mismatch: {0}")]
    LatticeMismatch(String),

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("insufficient points: need at least {needed}, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("non-positive value {value} at index {index} cannot enter a log-log fit")]
    NonPositive { index: usize, value: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("unknown {kind}: {name}")]
    Unknown { kind: &'static str, name: String },

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, HomogError>;
