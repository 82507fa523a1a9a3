//! The chat-completion boundary.

use alloc::string::String;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProviderError {
    #[error("provider call timed out")]
    Timeout,
    #[error("provider authentication failed: {0}")]
    AuthFailure(String),
    #[error("transport failure: {0}")]
    TransportFailure(String),
    #[error("provider returned HTTP {0}")]
    NonSuccessStatus(u16),
}

/// A single-message, no-history chat call. Every call starts from a fresh
/// context; the prompt carries all the memory there is.
pub trait ChatProvider: Send + Sync {
    fn chat(&self, prompt: &str) -> Result<String, ProviderError>;
}

impl<P: ChatProvider + ?Sized> ChatProvider for &P {
    fn chat(&self, prompt: &str) -> Result<String, ProviderError> {
        (**self).chat(prompt)
    }
}

impl<P: ChatProvider + ?Sized> ChatProvider for alloc::boxed::Box<P> {
    fn chat(&self, prompt: &str) -> Result<String, ProviderError> {
        (**self).chat(prompt)
    }
}

impl<P: ChatProvider + ?Sized> ChatProvider for alloc::sync::Arc<P> {
    fn chat(&self, prompt: &str) -> Result<String, ProviderError> {
        (**self).chat(prompt)
    }
}
