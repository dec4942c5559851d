use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{AnnotateError, ChatParams};

/// Timestamp used by offline backends when none is recorded.
pub const OFFLINE_TIMESTAMP: &str = "1970-01-01T00:00:00Z";

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub publication_id: String,
    pub prompt_id: String,
    pub params: ChatParams,
    pub system: String,
    pub user: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatResponse {
    pub content: String,
    /// Provider-reported usage; estimated when absent.
    pub usage: Option<Usage>,
    pub timestamp: Option<String>,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BackendError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rate limited")]
    RateLimited { retry_after: Option<Duration> },
    #[error("server error: HTTP {status}")]
    Server { status: u16, body: String },
    #[error("request rejected: HTTP {status}: {body}")]
    Client { status: u16, body: String },
    #[error("transport: {0}")]
    Transport(String),
    #[error("no recorded response for {publication_id} / {prompt_id} / {model}")]
    MissingFixture {
        publication_id: String,
        prompt_id: String,
        model: String,
    },
}

impl BackendError {
    /// Whether another attempt could succeed.
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            BackendError::RateLimited { .. } | BackendError::Server { .. } | BackendError::Transport(_)
        )
    }
}

/// A chat-completion provider.
pub trait Backend: Send + Sync {
    /// Short description for manifests, e.g. `replay:fixtures.jsonl`.
    fn describe(&self) -> String;
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError>;
}

/// One recorded exchange in a replay fixture (JSON Lines).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub publication_id: String,
    pub prompt_id: String,
    pub model: String,
    pub response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<Usage>,
}

/// Serves recorded responses keyed by `(publication, prompt, model)`.
#[derive(Debug)]
pub struct ReplayBackend {
    name: String,
    entries: HashMap<(String, String, String), ReplayEntry>,
    calls: AtomicUsize,
}

impl ReplayBackend {
    pub fn new(name: impl Into<String>, entries: Vec<ReplayEntry>) -> Self {
        let entries = entries
            .into_iter()
            .map(|e| ((e.publication_id.clone(), e.prompt_id.clone(), e.model.clone()), e))
            .collect();
        Self {
            name: name.into(),
            entries,
            calls: AtomicUsize::new(0),
        }
    }

    /// Reads a JSONL fixture. Later duplicates replace earlier ones.
    pub fn from_reader<R: BufRead>(name: impl Into<String>, reader: R) -> Result<Self, AnnotateError> {
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| AnnotateError::Fixture(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: ReplayEntry =
                serde_json::from_str(&line).map_err(|e| AnnotateError::Fixture(format!("line {}: {e}", i + 1)))?;
            entries.push(entry);
        }
        Ok(Self::new(name, entries))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Backend for ReplayBackend {
    fn describe(&self) -> String {
        format!("replay:{}", self.name)
    }

    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let key = (
            request.publication_id.clone(),
            request.prompt_id.clone(),
            request.params.model.clone(),
        );
        let entry = self.entries.get(&key).ok_or_else(|| BackendError::MissingFixture {
            publication_id: key.0.clone(),
            prompt_id: key.1.clone(),
            model: key.2.clone(),
        })?;
        Ok(ChatResponse {
            content: entry.response.clone(),
            usage: entry.usage,
            timestamp: Some(entry.timestamp.clone().unwrap_or_else(|| OFFLINE_TIMESTAMP.to_string())),
        })
    }
}

/// A scripted reply: either content or a failure status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MockReply {
    Content { content: String },
    Status { status: u16 },
    Transport { transport_error: String },
}

impl MockReply {
    pub fn content(s: impl Into<String>) -> Self {
        MockReply::Content { content: s.into() }
    }

    fn into_result(self) -> Result<ChatResponse, BackendError> {
        match self {
            MockReply::Content { content } => Ok(ChatResponse {
                content,
                usage: None,
                timestamp: Some(OFFLINE_TIMESTAMP.to_string()),
            }),
            MockReply::Status { status } => Err(super::http::status_error(status, String::new(), None)),
            MockReply::Transport { transport_error } => Err(BackendError::Transport(transport_error)),
        }
    }
}

/// Script file layout for [`MockBackend`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockScript {
    /// Reply once a publication's queue is exhausted or absent.
    #[serde(default)]
    pub default: Option<MockReply>,
    /// Per-publication replies, consumed in order.
    #[serde(default)]
    pub replies: BTreeMap<String, Vec<MockReply>>,
}

/// Scripted backend that counts calls.
#[derive(Debug, Default)]
pub struct MockBackend {
    default: Option<MockReply>,
    queues: Mutex<HashMap<String, std::collections::VecDeque<MockReply>>>,
    calls: AtomicUsize,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Self {
        Self {
            default: script.default,
            queues: Mutex::new(script.replies.into_iter().map(|(k, v)| (k, v.into())).collect()),
            calls: AtomicUsize::new(0),
        }
    }

    /// Always answers `content`.
    pub fn constant(content: impl Into<String>) -> Self {
        Self::new(MockScript {
            default: Some(MockReply::content(content)),
            replies: BTreeMap::new(),
        })
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Backend for MockBackend {
    fn describe(&self) -> String {
        "mock".into()
    }

    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let scripted = self
            .queues
            .lock()
            .expect("mock queue lock")
            .get_mut(&request.publication_id)
            .and_then(|q| q.pop_front());
        match scripted.or_else(|| self.default.clone()) {
            Some(reply) => reply.into_result(),
            None => Err(BackendError::MissingFixture {
                publication_id: request.publication_id.clone(),
                prompt_id: request.prompt_id.clone(),
                model: request.params.model.clone(),
            }),
        }
    }
}
