//! OpenAI-compatible wire protocol over blocking HTTP.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{
    Backend, ChatRequest, ChatResponse, EmbeddingRequest, FinishReason, GatewayError, TokenUsage,
};

/// Environment variable holding the bearer token.
pub const API_KEY_ENV: &str = "OPENESD_API_KEY";

pub struct OpenAiBackend {
    base_url: String,
    api_key: String,
    agent: ureq::Agent,
}

impl OpenAiBackend {
    /// Reads the API key from [`API_KEY_ENV`].
    pub fn from_env(base_url: &str, timeout: Duration) -> Result<Self, GatewayError> {
        let key = std::env::var(API_KEY_ENV)
            .map_err(|_| GatewayError::InvalidRequest(format!("{API_KEY_ENV} is not set")))?;
        Ok(Self::new(base_url, &key, timeout))
    }

    pub fn new(base_url: &str, api_key: &str, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        OpenAiBackend {
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key: api_key.to_string(),
            agent,
        }
    }

    fn post<B: Serialize, R: for<'de> Deserialize<'de>>(
        &self,
        path: &str,
        body: &B,
    ) -> Result<R, GatewayError> {
        let url = format!("{}/{path}", self.base_url);
        let mut resp = self
            .agent
            .post(&url)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(body)
            .map_err(transport_error)?;
        let status = resp.status().as_u16();
        if status == 429 {
            let message = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(GatewayError::RateLimited { message });
        }
        if !(200..300).contains(&status) {
            let message = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(GatewayError::Transport {
                message: format!("HTTP {status} from {url}: {message}"),
                retryable: status >= 500 || status == 408,
            });
        }
        resp.body_mut()
            .read_json()
            .map_err(|e| GatewayError::BadResponse(e.to_string()))
    }
}

fn transport_error(e: ureq::Error) -> GatewayError {
    let retryable = matches!(
        e,
        ureq::Error::Io(_)
            | ureq::Error::Timeout(_)
            | ureq::Error::ConnectionFailed
            | ureq::Error::HostNotFound
            | ureq::Error::BodyStalled
    );
    GatewayError::Transport {
        message: e.to_string(),
        retryable,
    }
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct WireChatRequest<'a> {
    model: &'a str,
    messages: Vec<WireMessage<'a>>,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct WireChatResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireReply,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct WireReply {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

#[derive(Serialize)]
struct WireEmbeddingRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Deserialize)]
struct WireEmbeddingResponse {
    data: Vec<WireEmbedding>,
}

#[derive(Deserialize)]
struct WireEmbedding {
    #[serde(default)]
    index: usize,
    embedding: Vec<f64>,
}

impl Backend for OpenAiBackend {
    fn chat(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let mut messages = Vec::with_capacity(2);
        if !req.system.is_empty() {
            messages.push(WireMessage {
                role: "system",
                content: &req.system,
            });
        }
        messages.push(WireMessage {
            role: "user",
            content: &req.user,
        });
        let wire: WireChatResponse = self.post(
            "chat/completions",
            &WireChatRequest {
                model: &req.model_id,
                messages,
                temperature: req.temperature,
                max_tokens: req.max_tokens,
            },
        )?;
        let choice = wire
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| GatewayError::BadResponse("no choices in completion".into()))?;
        let finish_reason = match choice.finish_reason.as_deref() {
            Some("stop") | None => FinishReason::Stop,
            Some("length") => FinishReason::Length,
            Some(_) => FinishReason::Error,
        };
        Ok(ChatResponse {
            text: choice.message.content.unwrap_or_default(),
            finish_reason,
            usage: wire
                .usage
                .map(|u| TokenUsage {
                    prompt_tokens: u.prompt_tokens,
                    completion_tokens: u.completion_tokens,
                })
                .unwrap_or_default(),
        })
    }

    fn embed(&self, req: &EmbeddingRequest) -> Result<Vec<Vec<f64>>, GatewayError> {
        let wire: WireEmbeddingResponse = self.post(
            "embeddings",
            &WireEmbeddingRequest {
                model: &req.model_id,
                input: &req.input,
            },
        )?;
        let mut data = wire.data;
        data.sort_by_key(|d| d.index);
        Ok(data.into_iter().map(|d| d.embedding).collect())
    }
}
