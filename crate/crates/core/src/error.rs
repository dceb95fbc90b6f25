use alloc::boxed::Box;

/// Errors produced by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("no observations supplied")]
    EmptyData,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid dimension: {0}")]
    InvalidDimension(&'static str),
    #[error("response has zero variance or zero residual sum of squares")]
    DegenerateResponse,
    #[error("marginal fit interpolates the response exactly")]
    DegenerateFit,
    #[error("surrogate predictor is constant")]
    DegenerateSurrogate,
    #[error("correlation {0} outside [0, 1)")]
    InvalidRho(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("unsupported: {0}")]
    Unsupported(&'static str),
    #[error("variable index {index} out of range for p = {p}")]
    IndexOutOfRange { index: usize, p: usize },
    #[error("variable {index}: {source}")]
    Variable { index: usize, source: Box<Error> },
    #[error("iteration {iteration}: {source}")]
    Iteration { iteration: usize, source: Box<Error> },
}

impl Error {
    /// Stable machine-readable code, independent of any annotation wrappers.
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptyData => "EmptyData",
            Error::NonFinite(_) => "NonFinite",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::InvalidDimension(_) => "InvalidDimension",
            Error::DegenerateResponse => "DegenerateResponse",
            Error::DegenerateFit => "DegenerateFit",
            Error::DegenerateSurrogate => "DegenerateSurrogate",
            Error::InvalidRho(_) => "InvalidRho",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Unsupported(_) => "Unsupported",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::Variable { source, .. } | Error::Iteration { source, .. } => source.code(),
        }
    }

    /// The innermost error with annotations stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Variable { source, .. } | Error::Iteration { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures caused by the data itself rather than by numerics.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self.root(),
            Error::EmptyData
                | Error::NonFinite(_)
                | Error::LengthMismatch { .. }
                | Error::InvalidDimension(_)
                | Error::DegenerateResponse
                | Error::IndexOutOfRange { .. }
        )
    }

    pub(crate) fn at_variable(self, index: usize) -> Error {
        Error::Variable {
            index,
            source: Box::new(self),
        }
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Error {
        Error::Iteration {
            iteration,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn ensure_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub(crate) fn ensure_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, found })
    }
}
