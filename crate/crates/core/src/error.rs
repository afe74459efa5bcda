use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("{op}: {msg}")]
    InvalidShape { op: &'static str, msg: String },

    #[error("{op}: produced a non-finite value")]
    NonFinite { op: &'static str },

    #[error("backward called on a tensor with shape {0:?}; a scalar loss is required")]
    NotScalar(Vec<usize>),

    #[error("tape has already been consumed by a previous backward pass")]
    TapeConsumed,

    #[error("relative_l2: target sample {0} has zero norm")]
    DegenerateTarget(usize),

    #[error("size {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error("invalid parameters: {0}")]
    InvalidConfig(String),

    #[error("{solver} diverged at step {step} (t = {time:.6}): {detail}")]
    Diverged {
        solver: &'static str,
        step: usize,
        time: f64,
        detail: String,
    },

    #[error("conjugate gradient stalled after {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("{path}: refusing to overwrite existing output (pass --force)")]
    Exists { path: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        Error::ShapeMismatch {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }

    pub(crate) fn invalid_shape(op: &'static str, msg: impl Into<String>) -> Self {
        Error::InvalidShape {
            op,
            msg: msg.into(),
        }
    }
}
