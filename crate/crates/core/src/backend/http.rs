//! Client for chat-completions style HTTP endpoints.

use std::time::Duration;

use serde_json::{json, Value};

use super::embed::{Embedder, Embedding};
use super::{check_prompts, BackendError, CompletionRequest, CompletionResult, Completer};

#[derive(Debug, Clone, PartialEq)]
pub struct HttpConfig {
    /// Base URL, e.g. `http://localhost:8000/v1`.
    pub base_url: String,
    pub model: String,
    pub embed_model: Option<String>,
    pub api_key: Option<String>,
    pub timeout: Duration,
    /// Extra attempts after the first one fails with a retryable error.
    pub max_retries: u32,
    pub backoff: Duration,
    pub embed_dim: usize,
}

impl HttpConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        HttpConfig {
            base_url: base_url.into(),
            model: model.into(),
            embed_model: None,
            api_key: None,
            timeout: Duration::from_secs(10),
            max_retries: 3,
            backoff: Duration::from_millis(250),
            embed_dim: super::DEFAULT_DIM,
        }
    }

    /// Reads `SM_LLM_URL`, `SM_LLM_MODEL` and optionally `SM_LLM_API_KEY`, `SM_EMBED_MODEL`.
    pub fn from_env() -> Result<Self, BackendError> {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.is_empty());
        let url = var("SM_LLM_URL")
            .ok_or_else(|| BackendError::Config("SM_LLM_URL is not set".into()))?;
        let model = var("SM_LLM_MODEL")
            .ok_or_else(|| BackendError::Config("SM_LLM_MODEL is not set".into()))?;
        let mut cfg = HttpConfig::new(url, model);
        cfg.api_key = var("SM_LLM_API_KEY");
        cfg.embed_model = var("SM_EMBED_MODEL");
        Ok(cfg)
    }
}

pub struct HttpBackend {
    cfg: HttpConfig,
    client: reqwest::blocking::Client,
}

enum Attempt {
    Retry(String),
    Fatal(BackendError),
}

impl HttpBackend {
    pub fn new(cfg: HttpConfig) -> Result<Self, BackendError> {
        if !cfg.base_url.starts_with("http://") {
            return Err(BackendError::Config(format!(
                "only plain http:// endpoints are supported, got `{}`",
                cfg.base_url
            )));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(cfg.timeout)
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(HttpBackend { cfg, client })
    }

    pub fn config(&self) -> &HttpConfig {
        &self.cfg
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.cfg.base_url.trim_end_matches('/'), path)
    }

    fn attempt(&self, url: &str, body: &Value) -> Result<Value, Attempt> {
        let mut req = self.client.post(url).json(body);
        if let Some(key) = &self.cfg.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| Attempt::Retry(e.to_string()))?;
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(Attempt::Retry(format!("status {status}")));
        }
        if !status.is_success() {
            return Err(Attempt::Fatal(BackendError::Http {
                status: status.as_u16(),
                body: text,
            }));
        }
        serde_json::from_str(&text)
            .map_err(|e| Attempt::Fatal(BackendError::Response(format!("body is not JSON: {e}"))))
    }

    /// POSTs with bounded retries on transport errors, 5xx and 429.
    fn post(&self, path: &str, body: &Value) -> Result<Value, BackendError> {
        let url = self.url(path);
        let attempts = self.cfg.max_retries + 1;
        let mut last = String::new();
        for i in 0..attempts {
            match self.attempt(&url, body) {
                Ok(v) => return Ok(v),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(msg)) => {
                    log::warn!("{url}: attempt {} failed: {msg}", i + 1);
                    last = msg;
                    if i + 1 < attempts {
                        std::thread::sleep(self.cfg.backoff * 2u32.pow(i));
                    }
                }
            }
        }
        Err(BackendError::RetriesExhausted { attempts, last })
    }
}

impl Completer for HttpBackend {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResult, BackendError> {
        check_prompts(req)?;
        let mut body = json!({
            "model": self.cfg.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": req.system_prompt},
                {"role": "user", "content": req.user_prompt},
            ],
        });
        if req.schema.is_json() {
            body["response_format"] = json!({"type": "json_object"});
        }
        let reply = self.post("chat/completions", &body)?;
        let content = reply
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| BackendError::Response("missing choices[0].message.content".into()))?;
        Ok(CompletionResult::from_raw(req.schema, content.to_string()))
    }
}

impl Embedder for HttpBackend {
    fn dim(&self) -> usize {
        self.cfg.embed_dim
    }

    fn embed(&self, text: &str) -> Result<Embedding, BackendError> {
        let model = self.cfg.embed_model.as_ref().unwrap_or(&self.cfg.model);
        let reply = self.post("embeddings", &json!({"model": model, "input": text}))?;
        let values: Vec<f64> = reply
            .pointer("/data/0/embedding")
            .and_then(Value::as_array)
            .ok_or_else(|| BackendError::Response("missing data[0].embedding".into()))?
            .iter()
            .map(|v| v.as_f64().ok_or_else(|| BackendError::Response("non-numeric embedding".into())))
            .collect::<Result<_, _>>()?;
        if values.len() != self.cfg.embed_dim {
            return Err(BackendError::DimensionMismatch {
                left: self.cfg.embed_dim,
                right: values.len(),
            });
        }
        Ok(Embedding::new(values).normalized())
    }
}
