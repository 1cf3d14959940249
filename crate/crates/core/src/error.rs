use alloc::string::String;

/// Errors raised by the simulator, the receiver and the transfer tooling.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Tensor or grid dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// A configuration value is out of its allowed range.
    #[error("configuration error: {0}")]
    Config(String),
    /// An operation was called out of order or with malformed arguments.
    #[error("usage error: {0}")]
    Usage(String),
    /// A NaN or infinity showed up where finite values are required.
    #[error("non-finite value: {0}")]
    NonFinite(String),
    /// A checkpoint failed validation while decoding.
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    /// A checkpoint fingerprint does not match what the caller expects.
    #[error("fingerprint mismatch: {0}")]
    Fingerprint(String),
    /// A channel profile cannot be used.
    #[error("channel profile error: {0}")]
    Profile(String),
}

pub type Result<T> = core::result::Result<T, Error>;
