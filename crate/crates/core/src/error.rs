use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    /// Two points that must be separated coincide (self-interaction or a
    /// field point sitting on an emitter).
    #[error("singular separation: {0}")]
    Singularity(String),

    #[error("numerical failure: {message} ({diagnostics})")]
    Numerical { message: String, diagnostics: String },

    /// A disorder study lost too many realizations.
    #[error("study failed: {failed} of {total} realizations aborted (first error: {first})")]
    Study { failed: usize, total: usize, first: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn numerical(message: impl Into<String>, diagnostics: impl Into<String>) -> Self {
        Error::Numerical { message: message.into(), diagnostics: diagnostics.into() }
    }
}
