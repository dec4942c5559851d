//! Chat-completion annotation: request parameters, the response grammar,
//! the on-disk cache, cost accounting and the live, replay and mock
//! backends.

mod backend;
mod batch;
mod cache;
mod cost;
mod http;
mod manifest;
mod params;
mod parse;

pub use backend::{
    Backend, BackendError, ChatRequest, ChatResponse, MockBackend, MockReply, MockScript, ReplayBackend, ReplayEntry,
    Usage, OFFLINE_TIMESTAMP,
};
pub use batch::{
    annotate_batch, AnnotateOptions, AnnotationRecord, BatchOutcome, BatchStats, RetryPolicy, Sleeper,
    INVALID_INPUT_PREFIX, TRANSPORT_ERROR_PREFIX,
};
pub use cache::{cache_key, AnnotationCache};
pub use cost::{estimate_cost, estimate_tokens, CostModel, ModelRate, CHARS_PER_TOKEN, ESTIMATED_OUTPUT_TOKENS};
pub use http::{HttpBackend, API_KEY_ENV, DEFAULT_BASE_URL};
pub use manifest::{corpus_hash, read_records, write_records, RunManifest};
pub use params::ChatParams;
pub use parse::{parse_response, ParseError, ParseErrorKind, ParsedAnnotation, PARSE_WINDOW};

use thiserror::Error;

use crate::promptkit::PromptError;

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("{0}")]
    Auth(String),
    #[error("invalid chat parameters: {0}")]
    InvalidParams(String),
    #[error("invalid cost model: {0}")]
    InvalidCostModel(String),
    #[error("unknown model `{model}`; known models: {known}")]
    UnknownModel { model: String, known: String },
    #[error("cache: {0}")]
    Cache(String),
    #[error("replay fixture: {0}")]
    Fixture(String),
    #[error("annotation records: {0}")]
    Records(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
