use thiserror::Error;

/// Errors raised by the reachability engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReachError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid interval [{lo}, {hi}]: endpoints must be finite with lo <= hi")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty set: {0}")]
    EmptySet(&'static str),

    #[error("unsupported activation `{0}`")]
    UnsupportedActivation(String),
}

pub type Result<T> = std::result::Result<T, ReachError>;

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(ReachError::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}
