use thiserror::Error;

/// Errors raised by model construction, analysis and training.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid noise law at coordinate {coord}: {reason}")]
    InvalidNoise { coord: usize, reason: String },

    #[error("dimension {dim} is not divisible by the number of clusters {clusters}")]
    UnequalClusters { dim: usize, clusters: usize },

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("majority machinery requires an odd number of bits, got {0}")]
    EvenMajority(usize),

    #[error("subset size {k} exceeds number of bits {n}")]
    SubsetTooLarge { k: usize, n: usize },

    #[error("unsupported number of bits {0} (1..=20)")]
    UnsupportedBits(usize),

    #[error("unknown target function `{0}`")]
    UnknownTarget(String),

    #[error("invalid activation: {0}")]
    InvalidActivation(String),

    #[error("relu smoothing with zero variance is undefined at t = 0")]
    ReluKink,

    #[error("rank-deficient interpolation system (condition estimate {condition:.3e}); draw more or better-spread biases")]
    RankDeficient { condition: f64 },

    #[error("{missing} bias interval(s) were not hit by any drawn bias")]
    UnhitIntervals { missing: usize },

    #[error("target is not projection-consistent on the grid")]
    NotProjectionConsistent,

    #[error("non-finite gradient at step {step}: {detail}")]
    NonFiniteGradient { step: usize, detail: String },

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal mass {residual:.3e})")]
    EigenNoConvergence { sweeps: usize, residual: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
