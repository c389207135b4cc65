//! Embedding and completion backends plus the vector store.

pub mod embed;
pub mod http;
pub mod mock;
pub mod schema;
pub mod store;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use embed::{cosine, Embedder, Embedding, HashingEmbedder, DEFAULT_DIM};
pub use http::{HttpBackend, HttpConfig};
pub use mock::MockCompleter;
pub use schema::SchemaId;
pub use store::{JobOutcome, SharedStore, StoreEntry, VectorStore};

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("vector dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("completion request has an empty prompt")]
    EmptyPrompt,
    /// Retryable failure of a single attempt.
    #[error("transport: {0}")]
    Transport(String),
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("http status {status}: {body}")]
    Http { status: u16, body: String },
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("malformed response: {0}")]
    Response(String),
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub system_prompt: String,
    pub user_prompt: String,
    pub schema: SchemaId,
}

impl CompletionRequest {
    pub fn new(schema: SchemaId, system_prompt: impl Into<String>, user_prompt: impl Into<String>) -> Self {
        CompletionRequest {
            system_prompt: system_prompt.into(),
            user_prompt: user_prompt.into(),
            schema,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub raw_text: String,
    pub parsed: Option<Value>,
    pub ok: bool,
}

impl CompletionResult {
    /// Validates `raw_text` against `schema`.
    pub fn from_raw(schema: SchemaId, raw_text: String) -> Self {
        let parsed = schema::validate(schema, &raw_text);
        CompletionResult {
            ok: parsed.is_some(),
            parsed,
            raw_text,
        }
    }
}

pub trait Completer: Send + Sync {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResult, BackendError>;
}

impl<T: Completer + ?Sized> Completer for &T {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResult, BackendError> {
        (**self).complete(req)
    }
}

impl<T: Embedder + ?Sized> Embedder for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn embed(&self, text: &str) -> Result<Embedding, BackendError> {
        (**self).embed(text)
    }
}

pub(crate) fn check_prompts(req: &CompletionRequest) -> Result<(), BackendError> {
    if req.system_prompt.trim().is_empty() || req.user_prompt.trim().is_empty() {
        return Err(BackendError::EmptyPrompt);
    }
    Ok(())
}
