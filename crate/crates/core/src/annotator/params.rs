use serde::{Deserialize, Serialize};

use super::AnnotateError;

/// Sampling parameters sent with every chat-completion request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChatParams {
    pub model: String,
    pub temperature: f64,
    pub top_p: f64,
    pub n: u32,
    pub stream: bool,
    pub presence_penalty: f64,
    pub frequency_penalty: f64,
}

impl Default for ChatParams {
    fn default() -> Self {
        Self {
            model: "gpt-3.5-turbo".into(),
            temperature: 0.0,
            top_p: 0.1,
            n: 1,
            stream: false,
            presence_penalty: 0.0,
            frequency_penalty: 0.0,
        }
    }
}

impl ChatParams {
    pub fn for_model(model: impl Into<String>) -> Self {
        Self {
            model: model.into(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), AnnotateError> {
        let bad = |reason: &str| Err(AnnotateError::InvalidParams(reason.to_string()));
        if self.model.trim().is_empty() {
            return bad("model must be set");
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return bad("temperature must be >= 0");
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return bad("top_p must lie in (0, 1]");
        }
        if self.n < 1 {
            return bad("n must be >= 1");
        }
        if self.stream {
            return bad("streaming responses are not supported");
        }
        if !self.presence_penalty.is_finite() || !self.frequency_penalty.is_finite() {
            return bad("penalties must be finite");
        }
        Ok(())
    }
}
