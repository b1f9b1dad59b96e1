use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, MtdError>;

#[derive(Debug, Error)]
pub enum MtdError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(
        "placed {placed} of {target} occurrences before {rejections} consecutive rejections; \
         the requested density is infeasible"
    )]
    PlacementFailure {
        placed: usize,
        target: usize,
        rejections: u64,
    },

    #[error("only {fitted} occurrence(s) fit in the measurement; at least 2 are required")]
    TooFewOccurrences { fitted: usize },

    #[error("only {picked} of {requested} windows could be selected under the exclusion radius")]
    InsufficientPicks { picked: usize, requested: usize },

    #[error("reference signal has zero norm")]
    ZeroNorm,

    #[error("coarse bin {bin} of order {order} is empty")]
    EmptyBin { order: usize, bin: usize },

    #[error("total posterior mass for signal coordinate {coord} is zero")]
    ZeroDenominator { coord: usize },

    #[error("objective is not finite at the initial point")]
    NonFiniteCost,

    #[error("incompatible partial statistics: {0}")]
    IncompatiblePartials(String),

    #[error("all {restarts} restarts failed; last error: {last}")]
    AllRestartsFailed { restarts: usize, last: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: parse error at byte {offset}: {message}")]
    Parse {
        path: PathBuf,
        offset: u64,
        message: String,
    },
}

impl MtdError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        MtdError::InvalidInput(msg.into())
    }

    /// True for failures of an iterative method rather than of the input data.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            MtdError::NonFiniteCost
                | MtdError::ZeroDenominator { .. }
                | MtdError::AllRestartsFailed { .. }
        )
    }
}
