use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on the inputs does not hold (dimension order, shape
    /// mismatch, invalid instance, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// An exhaustive computation would exceed its configured cap.
    #[error("resource limit exceeded: {what} needs {needed}, cap is {cap}")]
    Resource {
        what: &'static str,
        needed: String,
        cap: String,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn resource(what: &'static str, needed: impl ToString, cap: impl ToString) -> Self {
        Error::Resource {
            what,
            needed: needed.to_string(),
            cap: cap.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
