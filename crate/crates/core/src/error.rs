use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field has {got} values, grid expects {expected}")]
    FieldShape { expected: usize, got: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("negative diffusion coefficient {value} at cell {index}")]
    NegativeCoefficient { index: usize, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("ambiguous snap for coefficient {value}: exponents {first} and {second} are equally plausible")]
    AmbiguousSnap { value: f64, first: u32, second: u32 },

    #[error("linear solve did not converge after {iterations} iterations (relative residual {residual:e}, target {tolerance:e})")]
    LinearSolve {
        iterations: usize,
        residual: f64,
        tolerance: f64,
    },

    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("NaN or infinity appeared at step {step}")]
    Blowup { step: usize },

    #[error("cell problem not periodic after {periods} periods (last residual {last:e}, target {tolerance:e})")]
    NotPeriodic {
        periods: usize,
        last: f64,
        tolerance: f64,
        history: Vec<f64>,
    },

    #[error("snapshot spacing {spacing:e} exceeds {limit:e}")]
    SnapshotDensity { spacing: f64, limit: f64 },

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
