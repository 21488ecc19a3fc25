use thiserror::Error;

/// Errors shared across the crate's subsystems.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {context} (left {left:?}, right {right:?})")]
    ShapeMismatch {
        context: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("function evaluation produced a non-finite value at coordinate {coordinate}")]
    EvalNonFinite { coordinate: usize },

    #[error("all samples identical: variance estimate degenerates to zero")]
    DegenerateVariance,

    #[error("need at least {required} samples, got {got}")]
    TooFewSamples { required: usize, got: usize },

    #[error("class {0} has no samples")]
    MissingClass(usize),

    #[error("latent vector within 1e-6 of a softRmax singularity (min squared distance {min_d:.3e})")]
    NearSingular { min_d: f64 },

    #[error("training diverged: non-finite loss in epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("invalid attack target {target} (true label {label}, {k} classes)")]
    InvalidTarget { target: usize, label: usize, k: usize },

    #[error("substitute model training failed: {0}")]
    SubstituteTraining(String),

    #[error("weighted regression is rank-deficient: {0}")]
    DegenerateFit(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty range for class {0}: lo must be < hi")]
    EmptyRange(usize),

    #[error("IDX format error in {path}: {reason}")]
    IdxFormat { path: String, reason: String },

    #[error("IDX file {path} truncated: expected {expected} bytes of payload, found {found}")]
    IdxTruncated {
        path: String,
        expected: usize,
        found: usize,
    },

    #[error("checkpoint format error: {0}")]
    CheckpointFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
