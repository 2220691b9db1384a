//! Uniform access to chat-completion and embedding models.
//!
//! A [`Gateway`] sits in front of a [`Backend`] (a live OpenAI-compatible
//! endpoint or an in-process scripted model) and an optional [`Cassette`].
//! In replay mode no backend exists at all, so a replayed run cannot touch
//! the network.

mod cassette;
mod http;
mod ratelimit;
mod scripted;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cassette::{Cassette, CassetteEntry, CassetteMode, RecordedRequest, RecordedResponse};
pub use http::{OpenAiBackend, API_KEY_ENV};
pub use ratelimit::RateLimiter;
pub use scripted::{hashing_embedding, ScriptedBackend};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("no recorded response for request {fingerprint} (replay mode)")]
    CassetteMiss { fingerprint: String },
    #[error("transport failure: {message}")]
    Transport { message: String, retryable: bool },
    #[error("rate limited by upstream: {message}")]
    RateLimited { message: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("upstream returned a malformed response: {0}")]
    BadResponse(String),
    #[error("cassette error: {0}")]
    Cassette(String),
    #[error("gateway has no upstream backend configured")]
    NoBackend,
}

impl GatewayError {
    fn is_retryable(&self) -> bool {
        match self {
            GatewayError::Transport { retryable, .. } => *retryable,
            GatewayError::RateLimited { .. } => true,
            _ => false,
        }
    }
}

/// One chat-completion call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_id: String,
    pub system: String,
    pub user: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Template that produced the prompt. Recorded in traces and cassettes
    /// but not part of the fingerprint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
}

impl ChatRequest {
    pub fn new(model_id: impl Into<String>, user: impl Into<String>) -> Self {
        ChatRequest {
            model_id: model_id.into(),
            system: String::new(),
            user: user.into(),
            temperature: 0.0,
            max_tokens: 2048,
            tag: None,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.user.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("user prompt is empty".into()));
        }
        if !(0.0..=1.0).contains(&self.temperature) {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature {} outside [0, 1]",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(GatewayError::InvalidRequest(
                "max_tokens must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Stable hash over (model_id, system, user, temperature, max_tokens).
    pub fn fingerprint(&self) -> String {
        #[derive(Serialize)]
        struct Key<'a> {
            kind: &'static str,
            model_id: &'a str,
            system: &'a str,
            user: &'a str,
            temperature: f64,
            max_tokens: u32,
        }
        digest(&Key {
            kind: "chat",
            model_id: &self.model_id,
            system: &self.system,
            user: &self.user,
            temperature: self.temperature,
            max_tokens: self.max_tokens,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinishReason {
    Stop,
    Length,
    Error,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub finish_reason: FinishReason,
    #[serde(default)]
    pub usage: TokenUsage,
}

impl ChatResponse {
    pub fn stop(text: impl Into<String>) -> Self {
        ChatResponse {
            text: text.into(),
            finish_reason: FinishReason::Stop,
            usage: TokenUsage::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRequest {
    pub model_id: String,
    pub input: Vec<String>,
}

impl EmbeddingRequest {
    pub fn fingerprint(&self) -> String {
        #[derive(Serialize)]
        struct Key<'a> {
            kind: &'static str,
            model_id: &'a str,
            input: &'a [String],
        }
        digest(&Key {
            kind: "embedding",
            model_id: &self.model_id,
            input: &self.input,
        })
    }
}

/// A dense vector with unit L2 norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    values: Vec<f64>,
    pub model_id: String,
}

impl EmbeddingVector {
    /// Normalizes `values` to unit length. Empty or zero vectors are rejected.
    pub fn new(values: Vec<f64>, model_id: impl Into<String>) -> Result<Self, GatewayError> {
        if values.is_empty() {
            return Err(GatewayError::BadResponse("empty embedding vector".into()));
        }
        let norm = values.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(GatewayError::BadResponse(
                "embedding has zero or non-finite norm".into(),
            ));
        }
        Ok(EmbeddingVector {
            values: values.into_iter().map(|x| x / norm).collect(),
            model_id: model_id.into(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

fn digest<T: Serialize>(key: &T) -> String {
    let bytes = serde_json::to_vec(key).expect("fingerprint key serializes");
    hex::encode(Sha256::digest(&bytes))
}

/// Anything that can answer chat and embedding requests.
pub trait Backend: Send + Sync {
    fn chat(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError>;
    fn embed(&self, req: &EmbeddingRequest) -> Result<Vec<Vec<f64>>, GatewayError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(20),
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        RetryPolicy {
            max_retries: 0,
            ..Default::default()
        }
    }

    fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Served {
    Cassette,
    Upstream,
}

/// One request seen by the gateway, in arrival order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceEntry {
    pub fingerprint: String,
    pub tag: Option<String>,
    pub served: Served,
}

pub struct Gateway {
    upstream: Option<Arc<dyn Backend>>,
    cassette: Option<Mutex<Cassette>>,
    retry: RetryPolicy,
    limiter: Option<RateLimiter>,
    trace: Mutex<Vec<TraceEntry>>,
    upstream_calls: AtomicUsize,
}

impl Gateway {
    /// Every request goes upstream; nothing is recorded.
    pub fn passthrough(backend: Arc<dyn Backend>) -> Self {
        Gateway {
            upstream: Some(backend),
            cassette: None,
            retry: RetryPolicy::default(),
            limiter: None,
            trace: Mutex::new(Vec::new()),
            upstream_calls: AtomicUsize::new(0),
        }
    }

    /// Serves known fingerprints from the cassette and records the rest.
    pub fn recording(backend: Arc<dyn Backend>, cassette: Cassette) -> Self {
        Gateway {
            cassette: Some(Mutex::new(cassette)),
            ..Gateway::passthrough(backend)
        }
    }

    /// Serves only from the cassette. No backend is held.
    pub fn replay(cassette: Cassette) -> Self {
        Gateway {
            upstream: None,
            cassette: Some(Mutex::new(cassette)),
            retry: RetryPolicy::none(),
            limiter: None,
            trace: Mutex::new(Vec::new()),
            upstream_calls: AtomicUsize::new(0),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_rate_limit(mut self, requests_per_minute: u32) -> Self {
        self.limiter = Some(RateLimiter::per_minute(requests_per_minute));
        self
    }

    pub fn is_replay(&self) -> bool {
        self.upstream.is_none()
    }

    /// Requests seen so far, in arrival order.
    pub fn trace(&self) -> Vec<TraceEntry> {
        self.trace.lock().expect("trace lock").clone()
    }

    pub fn upstream_calls(&self) -> usize {
        self.upstream_calls.load(Ordering::SeqCst)
    }

    pub fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        req.validate()?;
        let fingerprint = req.fingerprint();
        if let Some(RecordedResponse::Chat(resp)) = self.lookup(&fingerprint) {
            self.note(&fingerprint, req.tag.clone(), Served::Cassette);
            return Ok(resp);
        }
        let upstream = self.upstream_or_miss(&fingerprint)?;
        let resp = self.with_retries(|| upstream.chat(req))?;
        self.note(&fingerprint, req.tag.clone(), Served::Upstream);
        self.store(CassetteEntry {
            fingerprint,
            request: RecordedRequest::Chat(req.clone()),
            response: RecordedResponse::Chat(resp.clone()),
        })?;
        Ok(resp)
    }

    /// Embeds `texts` in one request; one unit vector per input, in order.
    pub fn embed(
        &self,
        model_id: &str,
        texts: &[String],
    ) -> Result<Vec<EmbeddingVector>, GatewayError> {
        if texts.is_empty() {
            return Err(GatewayError::InvalidRequest("no texts to embed".into()));
        }
        let req = EmbeddingRequest {
            model_id: model_id.to_string(),
            input: texts.to_vec(),
        };
        let fingerprint = req.fingerprint();
        let raw = match self.lookup(&fingerprint) {
            Some(RecordedResponse::Embedding { vectors }) => {
                self.note(&fingerprint, Some("embedding".into()), Served::Cassette);
                vectors
            }
            _ => {
                let upstream = self.upstream_or_miss(&fingerprint)?;
                let vectors = self.with_retries(|| upstream.embed(&req))?;
                self.note(&fingerprint, Some("embedding".into()), Served::Upstream);
                self.store(CassetteEntry {
                    fingerprint,
                    request: RecordedRequest::Embedding(req.clone()),
                    response: RecordedResponse::Embedding {
                        vectors: vectors.clone(),
                    },
                })?;
                vectors
            }
        };
        if raw.len() != texts.len() {
            return Err(GatewayError::BadResponse(format!(
                "expected {} embeddings, got {}",
                texts.len(),
                raw.len()
            )));
        }
        raw.into_iter()
            .map(|v| EmbeddingVector::new(v, model_id))
            .collect()
    }

    fn lookup(&self, fingerprint: &str) -> Option<RecordedResponse> {
        let cassette = self.cassette.as_ref()?;
        let guard = cassette.lock().expect("cassette lock");
        guard.get(fingerprint).map(|e| e.response.clone())
    }

    fn upstream_or_miss(&self, fingerprint: &str) -> Result<&Arc<dyn Backend>, GatewayError> {
        self.upstream
            .as_ref()
            .ok_or_else(|| GatewayError::CassetteMiss {
                fingerprint: fingerprint.to_string(),
            })
    }

    fn store(&self, entry: CassetteEntry) -> Result<(), GatewayError> {
        match &self.cassette {
            Some(c) => c.lock().expect("cassette lock").insert(entry),
            None => Ok(()),
        }
    }

    fn note(&self, fingerprint: &str, tag: Option<String>, served: Served) {
        self.trace.lock().expect("trace lock").push(TraceEntry {
            fingerprint: fingerprint.to_string(),
            tag,
            served,
        });
    }

    fn with_retries<T>(
        &self,
        mut call: impl FnMut() -> Result<T, GatewayError>,
    ) -> Result<T, GatewayError> {
        let mut attempt = 0;
        loop {
            if let Some(limiter) = &self.limiter {
                limiter.acquire();
            }
            self.upstream_calls.fetch_add(1, Ordering::SeqCst);
            match call() {
                Ok(v) => return Ok(v),
                Err(e) if e.is_retryable() && attempt < self.retry.max_retries => {
                    let delay = self.retry.delay(attempt);
                    log::warn!(
                        "upstream call failed ({e}); retry {} in {delay:?}",
                        attempt + 1
                    );
                    std::thread::sleep(delay);
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}
