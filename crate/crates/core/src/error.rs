//! Error type shared across the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A file failed to parse; `line` is 1-based and counts the header.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// Two objects that must agree in dimension do not.
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    Shape {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// A configuration value violates its invariant.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A value that must be finite is NaN or infinite.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("empty dataset")]
    EmptyDataset,

    /// A subgroup filter matched no samples.
    #[error("no samples carry tag `{0}`")]
    EmptySubgroup(String),

    /// Correlation is undefined because one side has no variance.
    #[error("correlation undefined: {0} has zero variance")]
    ZeroVariance(&'static str),

    /// Training produced a non-finite loss.
    #[error("non-finite loss ({value}) at epoch {epoch}, step {step}")]
    NonFiniteLoss {
        epoch: usize,
        step: usize,
        value: f64,
    },

    /// A gradient passed to the optimizer is NaN or infinite.
    #[error("non-finite gradient at parameter index {index}: {value} (step {step})")]
    NonFiniteGradient {
        index: usize,
        value: f64,
        step: u64,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(context: &'static str, expected: usize, got: usize) -> Self {
        Error::Shape {
            context,
            expected,
            got,
        }
    }
}
