use std::sync::atomic::{AtomicUsize, Ordering};

use super::{Backend, ChatRequest, ChatResponse, EmbeddingRequest, GatewayError};
use crate::model::normalize;

type ChatFn = dyn Fn(&ChatRequest) -> Result<String, GatewayError> + Send + Sync;
type EmbedFn = dyn Fn(&str) -> Vec<f64> + Send + Sync;

/// In-process backend driven by closures. Used for tests, fixture
/// recording and offline dry runs.
pub struct ScriptedBackend {
    chat: Box<ChatFn>,
    embed: Box<EmbedFn>,
    chat_calls: AtomicUsize,
    embed_calls: AtomicUsize,
}

impl ScriptedBackend {
    /// Chat answers come from `chat`; embeddings default to [`hashing_embedding`].
    pub fn new<F>(chat: F) -> Self
    where
        F: Fn(&ChatRequest) -> Result<String, GatewayError> + Send + Sync + 'static,
    {
        ScriptedBackend {
            chat: Box::new(chat),
            embed: Box::new(|t| hashing_embedding(t, 256)),
            chat_calls: AtomicUsize::new(0),
            embed_calls: AtomicUsize::new(0),
        }
    }

    pub fn with_embedder<F>(mut self, embed: F) -> Self
    where
        F: Fn(&str) -> Vec<f64> + Send + Sync + 'static,
    {
        self.embed = Box::new(embed);
        self
    }

    pub fn chat_calls(&self) -> usize {
        self.chat_calls.load(Ordering::SeqCst)
    }

    pub fn embed_calls(&self) -> usize {
        self.embed_calls.load(Ordering::SeqCst)
    }
}

impl Backend for ScriptedBackend {
    fn chat(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        self.chat_calls.fetch_add(1, Ordering::SeqCst);
        (self.chat)(req).map(ChatResponse::stop)
    }

    fn embed(&self, req: &EmbeddingRequest) -> Result<Vec<Vec<f64>>, GatewayError> {
        self.embed_calls.fetch_add(1, Ordering::SeqCst);
        Ok(req.input.iter().map(|t| (self.embed)(t)).collect())
    }
}

// FNV-1a, stable across platforms and toolchains
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn bucket(feature: &str, dim: usize) -> (usize, f64) {
    let v = fnv1a(feature.as_bytes());
    let sign = if v & 1 == 0 { 1.0 } else { -1.0 };
    ((v >> 1) as usize % dim, sign)
}

/// Deterministic feature-hashed bag of words and character trigrams over
/// the canonical form of `text`. Not a semantic encoder, but stable across
/// runs and good enough to group lexically close attribute names.
pub fn hashing_embedding(text: &str, dim: usize) -> Vec<f64> {
    let dim = dim.max(1);
    let canonical = normalize(text).canonical;
    let mut v = vec![0.0; dim];
    for word in canonical.split_whitespace() {
        let (i, s) = bucket(&format!("w:{word}"), dim);
        v[i] += 2.0 * s;
        let padded: Vec<char> = format!("#{word}#").chars().collect();
        for tri in padded.windows(3) {
            let tri: String = tri.iter().collect();
            let (i, s) = bucket(&format!("c:{tri}"), dim);
            v[i] += s;
        }
    }
    if v.iter().all(|x| *x == 0.0) {
        v[0] = 1.0;
    }
    v
}
