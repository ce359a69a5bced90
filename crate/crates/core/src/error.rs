use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("{what} did not converge within {terms} terms (partial sum {partial})")]
    Accuracy {
        what: &'static str,
        partial: f64,
        terms: usize,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numerical error at step {step}: {message}")]
    Numerical { step: usize, message: String },

    #[error("path {path}: {source}")]
    Path {
        path: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(
        "transfer identity failed: weighted estimate {weighted} vs direct {direct} \
         (difference {difference}, allowed {allowed})"
    )]
    TransferMismatch {
        weighted: f64,
        direct: f64,
        difference: f64,
        allowed: f64,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn numerical(step: usize, msg: impl Into<String>) -> Self {
        Error::Numerical {
            step,
            message: msg.into(),
        }
    }

    pub(crate) fn at_path(self, path: usize) -> Self {
        Error::Path {
            path,
            source: Box::new(self),
        }
    }
}
