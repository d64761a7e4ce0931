use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Input violates a structural precondition (shape, hermiticity, positivity).
    #[error("validation error: {0}")]
    Validation(String),
    /// Parameter outside the domain where the formula is defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// The Fock-space cutoff is too small for the requested state or operator.
    #[error("truncation error: {message} (need dimension >= {required})")]
    Truncation { message: String, required: usize },
    /// A quadrature or Monte-Carlo estimate cannot reach the requested accuracy.
    #[error("accuracy error: {0}")]
    Accuracy(String),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn truncation(msg: impl Into<String>, required: usize) -> Self {
        Error::Truncation {
            message: msg.into(),
            required,
        }
    }

    /// Short machine-readable tag, used by the CLI for exit codes.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Validation(_) => "validation",
            Error::Domain(_) => "domain",
            Error::Truncation { .. } => "truncation",
            Error::Accuracy(_) => "accuracy",
        }
    }
}
