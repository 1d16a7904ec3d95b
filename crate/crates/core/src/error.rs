use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    /// A value is outside its permitted domain (ratings, hyperparameters, sizes).
    #[error("validation error: {0}")]
    Validation(String),
    /// Shapes or lengths of related values do not agree.
    #[error("structural error: {0}")]
    Structural(String),
    /// A channel name has no position in the electrode layout.
    #[error("mapping error: channel `{0}` is not in the electrode layout")]
    UnknownChannel(String),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }
}
