//! Text-completion providers, prompt rendering and response parsing.

pub mod gateway;
pub mod parse;
pub mod providers;
pub mod remote;
pub mod templates;

use sha2::{Digest, Sha256};
use thiserror::Error;

pub use gateway::{Gateway, GatewayOptions, RetryPolicy};
pub use providers::{FnProvider, MockProvider, RecordingProvider};
pub use remote::{RemoteConfig, RemoteProvider};
pub use templates::{render, Placeholder, PromptKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("no fixture for {kind} prompt (key {key})")]
    MissingFixture { kind: PromptKind, key: String },
}

impl From<parse::Malformed> for LlmError {
    fn from(m: parse::Malformed) -> Self {
        LlmError::Malformed(m.0)
    }
}

/// A fully rendered prompt together with what it was rendered from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptRequest {
    pub kind: PromptKind,
    pub values: Vec<(Placeholder, String)>,
    pub text: String,
}

impl PromptRequest {
    pub fn new(kind: PromptKind, values: Vec<(Placeholder, String)>) -> Result<Self, LlmError> {
        let borrowed: Vec<(Placeholder, &str)> = values.iter().map(|(p, v)| (*p, v.as_str())).collect();
        let text = render(kind, &borrowed)
            .map_err(|m| LlmError::Precondition(format!("missing value for {}", m.0.name())))?;
        Ok(PromptRequest { kind, values, text })
    }

    /// Fixture key: hex sha256 over the kind and the substituted values in
    /// template order.
    pub fn fixture_key(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.kind.as_str().as_bytes());
        for p in self.kind.placeholders() {
            let v = self.values.iter().find(|(k, _)| *k == p).map_or("", |(_, v)| v.as_str());
            h.update([0u8]);
            h.update(p.name().as_bytes());
            h.update([b'=']);
            h.update(v.as_bytes());
        }
        hex::encode(h.finalize())
    }
}

pub trait CompletionProvider: Send + Sync {
    fn id(&self) -> &str;
    fn complete(&self, request: &PromptRequest) -> Result<String, LlmError>;
}

impl<P: CompletionProvider + ?Sized> CompletionProvider for std::sync::Arc<P> {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn complete(&self, request: &PromptRequest) -> Result<String, LlmError> {
        (**self).complete(request)
    }
}

impl<P: CompletionProvider + ?Sized> CompletionProvider for Box<P> {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn complete(&self, request: &PromptRequest) -> Result<String, LlmError> {
        (**self).complete(request)
    }
}
