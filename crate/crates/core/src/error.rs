use thiserror::Error;

/// Errors raised anywhere in the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid step schedule: {0}")]
    InvalidSchedule(String),

    #[error("step index must be >= 1, got 0")]
    ZeroStepIndex,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite gradient component at index {index}")]
    NonFiniteGradient { index: usize },

    #[error("degenerate sample: gradient undefined at h = x")]
    DegenerateSample,

    #[error("invalid problem parameters: {0}")]
    InvalidProblem(String),

    #[error("assumption check failed: {0}")]
    Assumption(String),

    #[error("threshold search for {name} exceeded the cap of {cap} ({detail})")]
    ThresholdCap {
        name: &'static str,
        cap: u64,
        detail: String,
    },

    #[error("divergent series: decay rate must be positive, got {0}")]
    DivergentSeries(f64),

    #[error("derived constant {name} is not finite ({value})")]
    NonFiniteConstant { name: &'static str, value: f64 },

    #[error("bound {theorem} is not applicable: {reason}")]
    Inapplicable {
        theorem: &'static str,
        reason: String,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("checkpoint mismatch between error curves and bound curve")]
    CheckpointMismatch,

    #[error("{diverged} of {replicates} replicates diverged (tolerance 1%); first diverged replicates: {first:?}")]
    Divergence {
        diverged: usize,
        replicates: usize,
        first: Vec<usize>,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
