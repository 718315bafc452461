use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("gauge class condition violated: {0}")]
    Class(String),
    #[error("too large to materialize: {0}")]
    TooLarge(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn invalid(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
