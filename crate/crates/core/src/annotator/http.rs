use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::backend::{Backend, BackendError, ChatRequest, ChatResponse, Usage};
use super::AnnotateError;

pub const API_KEY_ENV: &str = "ANNOBENCH_API_KEY";
pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";

/// Live chat-completions client for any compatible endpoint.
pub struct HttpBackend {
    base_url: String,
    api_key: String,
    agent: ureq::Agent,
}

impl std::fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend")
            .field("base_url", &self.base_url)
            .finish_non_exhaustive()
    }
}

#[derive(Deserialize)]
struct Completion {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

pub(crate) fn status_error(status: u16, body: String, retry_after: Option<Duration>) -> BackendError {
    match status {
        401 | 403 => BackendError::Auth(format!(
            "HTTP {status}; check that {API_KEY_ENV} holds a valid key for this endpoint"
        )),
        429 => BackendError::RateLimited { retry_after },
        500..=599 => BackendError::Server { status, body },
        _ => BackendError::Client { status, body },
    }
}

impl HttpBackend {
    pub fn new(base_url: impl Into<String>, api_key: impl Into<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .into();
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key: api_key.into(),
            agent,
        }
    }

    /// Reads the key from `ANNOBENCH_API_KEY`.
    pub fn from_env(base_url: impl Into<String>) -> Result<Self, AnnotateError> {
        match std::env::var(API_KEY_ENV) {
            Ok(key) if !key.trim().is_empty() => Ok(Self::new(base_url, key.trim())),
            _ => Err(AnnotateError::Auth(format!(
                "{API_KEY_ENV} is not set; export it or use a replay/mock backend"
            ))),
        }
    }

    pub fn request_body(request: &ChatRequest) -> serde_json::Value {
        let p = &request.params;
        json!({
            "model": p.model,
            "messages": [
                {"role": "system", "content": request.system},
                {"role": "user", "content": request.user},
            ],
            "temperature": p.temperature,
            "top_p": p.top_p,
            "n": p.n,
            "stream": p.stream,
            "presence_penalty": p.presence_penalty,
            "frequency_penalty": p.frequency_penalty,
        })
    }
}

impl Backend for HttpBackend {
    fn describe(&self) -> String {
        format!("live:{}", self.base_url)
    }

    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let mut resp = self
            .agent
            .post(format!("{}/chat/completions", self.base_url))
            .header("Authorization", format!("Bearer {}", self.api_key))
            .send_json(Self::request_body(request))
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let retry_after = resp
            .headers()
            .get("retry-after")
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<f64>().ok())
            .filter(|s| s.is_finite() && *s >= 0.0)
            .map(Duration::from_secs_f64);
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        if status != 200 {
            return Err(status_error(status, body, retry_after));
        }
        let completion: Completion = serde_json::from_str(&body)
            .map_err(|e| BackendError::Transport(format!("unexpected response body: {e}")))?;
        let content = completion
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::Transport("response has no choices".into()))?;
        Ok(ChatResponse {
            content,
            usage: completion.usage.map(|u| Usage {
                input_tokens: u.prompt_tokens,
                output_tokens: u.completion_tokens,
            }),
            timestamp: Some(chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)),
        })
    }
}
