use thiserror::Error;

use crate::labeled::Label;

/// Errors raised by the filters and their building blocks.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("label {0} appears in more than one density")]
    LabelCollision(Label),

    #[error("singular innovation covariance")]
    SingularInnovation,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{0} requires a non-empty mixture")]
    EmptyMixture(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::Dimension {
            context,
            expected,
            actual,
        }
    }

    /// True for failures caused by floating-point degeneracy rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::SingularInnovation | Error::Numerical(_))
    }
}
