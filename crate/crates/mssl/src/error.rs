use thiserror::Error;

/// Error type shared by every module in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("csv error in task '{task}': {message}")]
    Csv { task: String, message: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid value: {0}")]
    Invalid(String),

    #[error("matrix not symmetric: {0}")]
    Asymmetric(String),

    #[error("matrix not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("solver diverged at iteration {iteration}: {message}")]
    Diverged { iteration: usize, message: String },

    #[error("selection aborted: {0}")]
    SelectionAborted(String),

    #[error("json error: {0}")]
    Json(String),
}

impl Error {
    /// True for failures of the numerics themselves, as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite(_)
                | Error::Singular(_)
                | Error::Diverged { .. }
                | Error::SelectionAborted(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
