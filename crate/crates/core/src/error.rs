use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("outside the domain: {0}")]
    Domain(String),
    #[error("eigensolver did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error(
        "exponent {value:.3} exceeds {limit}; rescale the null covariance so that its largest eigenvalue is below 1"
    )]
    Overflow { value: f64, limit: f64 },
    #[error("{step}: {source}")]
    Step { step: &'static str, source: Box<Error> },
}

/// Coarse classification used to map errors onto process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Config,
    Numeric,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Input(_) | Error::DimensionMismatch { .. } => ErrorKind::Input,
            Error::Config(_) => ErrorKind::Config,
            Error::Domain(_) | Error::NoConvergence { .. } | Error::Overflow { .. } => ErrorKind::Numeric,
            Error::Step { source, .. } => source.kind(),
        }
    }

    /// Wraps the error with the name of the pipeline step that produced it.
    pub fn at(self, step: &'static str) -> Error {
        Error::Step {
            step,
            source: Box::new(self),
        }
    }

    /// The innermost error, stripped of step annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::Step { source, .. } => source.root(),
            other => other,
        }
    }
}

pub(crate) trait StepExt<T> {
    fn step(self, step: &'static str) -> Result<T>;
}

impl<T> StepExt<T> for Result<T> {
    fn step(self, step: &'static str) -> Result<T> {
        self.map_err(|e| e.at(step))
    }
}
