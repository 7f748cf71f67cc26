use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A point or tangent vector lies outside the chart domain of a model.
    #[error("domain error: {0}")]
    Domain(String),
    /// A geodesic or transport integration step produced an unusable state.
    #[error("integration error: {0}")]
    Integration(String),
    /// Caller supplied an argument violating a precondition.
    #[error("invalid argument: {0}")]
    Argument(String),
    /// A numeric routine hit a singular or non-finite quantity.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// The rate pipeline could not be evaluated with the given inputs.
    #[error("rate pipeline error: {0}")]
    Pipeline(String),
    /// A failure while sampling a particular path.
    #[error("path {index}: {source}")]
    Path {
        index: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_path(self, index: u64) -> Self {
        match self {
            Error::Path { .. } => self,
            other => Error::Path {
                index,
                source: Box::new(other),
            },
        }
    }

    /// The innermost error, with any path annotation removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Path { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
