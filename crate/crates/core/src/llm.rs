//! Template-driven model calls with parsed, repairable replies.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{ChatRequest, EmbeddingVector, Gateway, GatewayError};
use crate::prompt::{ParseError, PromptError, PromptKit, TemplateId};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LlmError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("unparseable reply to {template}: {reason}")]
    Unparseable {
        template: TemplateId,
        reason: ParseError,
        raw: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSettings {
    pub chat_model: String,
    pub embedding_model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Extra attempts after an unparseable reply.
    pub repair_budget: u32,
    /// Concurrent calls within one document's stage.
    pub workers: usize,
}

impl Default for LlmSettings {
    fn default() -> Self {
        LlmSettings {
            chat_model: "gpt-4o".into(),
            embedding_model: "text-embedding-3-small".into(),
            temperature: 0.0,
            max_tokens: 2048,
            repair_budget: 1,
            workers: 4,
        }
    }
}

/// A parsed reply and how many repair prompts it took.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub payload: T,
    pub repair_count: u32,
}

/// Gateway plus prompt registry plus call settings. Cheap to clone.
#[derive(Clone)]
pub struct Llm {
    gateway: Arc<Gateway>,
    prompts: Arc<PromptKit>,
    pub settings: LlmSettings,
}

impl Llm {
    pub fn new(gateway: Arc<Gateway>, prompts: Arc<PromptKit>, settings: LlmSettings) -> Self {
        Llm {
            gateway,
            prompts,
            settings,
        }
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn prompts(&self) -> &PromptKit {
        &self.prompts
    }

    fn request(&self, user: String, tag: String) -> ChatRequest {
        let mut req = ChatRequest::new(self.settings.chat_model.clone(), user);
        req.temperature = self.settings.temperature;
        req.max_tokens = self.settings.max_tokens;
        req.tag = Some(tag);
        req
    }

    /// Renders `id` and returns the raw reply text.
    pub fn ask_raw(&self, id: TemplateId, bindings: &[(&str, &str)]) -> Result<String, LlmError> {
        let prompt = self.prompts.render(id, bindings)?;
        let reply = self
            .gateway
            .complete(&self.request(prompt, id.to_string()))?;
        Ok(reply.text)
    }

    /// Renders `id`, sends it and parses the reply. An unparseable reply is
    /// answered with a repair prompt up to `repair_budget` times.
    pub fn ask<T>(
        &self,
        id: TemplateId,
        bindings: &[(&str, &str)],
        parse: impl Fn(&str) -> Result<T, ParseError>,
    ) -> Result<Parsed<T>, LlmError> {
        let prompt = self.prompts.render(id, bindings)?;
        let mut raw = self
            .gateway
            .complete(&self.request(prompt.clone(), id.to_string()))?
            .text;
        let mut repair_count = 0;
        loop {
            match parse(&raw) {
                Ok(payload) => {
                    return Ok(Parsed {
                        payload,
                        repair_count,
                    })
                }
                Err(reason) if repair_count >= self.settings.repair_budget => {
                    return Err(LlmError::Unparseable {
                        template: id,
                        reason,
                        raw,
                    })
                }
                Err(reason) => {
                    repair_count += 1;
                    log::debug!("{id}: repairing reply ({reason})");
                    let user = repair_prompt(&prompt, &raw, &reason);
                    raw = self
                        .gateway
                        .complete(&self.request(user, format!("{id}:repair")))?
                        .text;
                }
            }
        }
    }

    pub fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, LlmError> {
        Ok(self.gateway.embed(&self.settings.embedding_model, texts)?)
    }
}

fn repair_prompt(original: &str, previous: &str, reason: &ParseError) -> String {
    format!(
        "{original}\n\nYour previous reply was:\n{previous}\n\n\
It could not be used ({reason}). Respond again with only the required JSON."
    )
}

/// Runs `f` over `items` on up to `workers` threads. Results keep input order.
pub fn ordered_map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(&f).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots: Vec<std::sync::Mutex<Option<R>>> =
        items.iter().map(|_| std::sync::Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                let Some(item) = items.get(i) else { break };
                let r = f(item);
                *slots[i].lock().expect("result slot") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| {
            m.into_inner()
                .expect("result slot")
                .expect("every item mapped")
        })
        .collect()
}
