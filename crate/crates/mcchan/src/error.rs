use thiserror::Error;

/// Errors raised by the channel model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A configuration field violates its invariant.
    #[error("invalid configuration field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    /// The selected mobility scenario does not match the configuration.
    #[error("scenario {scenario} is inconsistent with the configuration: {reason}")]
    ScenarioMismatch { scenario: String, reason: String },

    /// An argument is outside the domain of the operation.
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    /// The channel is deterministic (D2 = 0 or t = 0) and the requested
    /// quantity has no finite density.
    #[error("channel is deterministic at this time; {0}")]
    Deterministic(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid_arg(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidArgument {
        name,
        reason: reason.into(),
    }
}
