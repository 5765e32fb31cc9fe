use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid mismatch: expected {expected:?}, got {found:?}")]
    Alignment {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("invalid chart: {0}")]
    InvalidChart(String),

    #[error("invalid warped profile: {0}")]
    InvalidProfile(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("time step {dt:e} exceeds the stability limit {limit:e}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("non-finite conformal factor after a step of size {dt:e}")]
    NonFinite { dt: f64 },

    #[error("linear solver stopped after {iterations} iterations with relative residual {residual:e}")]
    SolverDivergence { iterations: usize, residual: f64 },

    #[error("source violates the zero-mean solvability condition: integral {integral:e}, L1 norm {l1:e}")]
    NonZeroMean { integral: f64, l1: f64 },

    #[error("parabolic-like end: exhaustion gaps {gaps:?} stopped contracting")]
    ParabolicLike { gaps: Vec<f64> },

    #[error("geodesic ball of radius {radius} around the pole reaches the chart boundary")]
    BallOutsideDomain { radius: f64 },

    #[error("fit undefined: {0}")]
    FitUndefined(String),

    #[error("trajectory mismatch: {0}")]
    TrajectoryMismatch(String),

    #[error("series level {level} is outside the available range 1..={order}")]
    LevelOutOfRange { level: usize, order: usize },

    #[error("target volume {target} outside achievable range [{min}, {max}]")]
    Unachievable { target: f64, min: f64, max: f64 },

    #[error("no growth rate stabilizes:\n{table}")]
    NoStableConstant { table: String },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
