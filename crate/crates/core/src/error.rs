use alloc::string::String;

/// Errors shared by every operation in the crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Shapes, indices, labels or parameters outside their documented domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// An iterative kernel did not converge within its iteration cap.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    /// The adaptive rank rule found no consecutive singular value gap `>= threshold`.
    #[error("no singular value gap reaches the threshold {threshold}")]
    NoGapFound { threshold: f64 },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

macro_rules! invalid {
    ($($arg:tt)*) => {
        $crate::error::Error::InvalidInput(alloc::format!($($arg)*))
    };
}
pub(crate) use invalid;
