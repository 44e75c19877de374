use alloc::string::String;

/// Errors raised by the simulator core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[non_exhaustive]
pub enum Error {
    /// A parameter is outside its documented domain.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Two vectors or layouts that must agree in length or shape do not.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A class label is not a valid class index.
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    /// A vector that must be finite contains NaN or infinity.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// Not enough samples to satisfy a partition request.
    #[error("insufficient samples: need {needed}, have {available}")]
    Capacity { needed: usize, available: usize },

    /// A formula is undefined for the supplied inputs (e.g. log of a
    /// nonpositive number).
    #[error("domain error: {0}")]
    Domain(String),

    /// Training produced non-finite parameters.
    #[error("training diverged at round {round}: non-finite global parameters")]
    Divergence { round: usize },

    /// An operation received an empty input where a nonempty one is required.
    #[error("empty input: {0}")]
    Empty(&'static str),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
