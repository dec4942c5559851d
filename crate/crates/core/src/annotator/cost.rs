use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{AnnotateError, ChatParams};
use crate::corpus::Publication;
use crate::promptkit::{build_user_message, PromptSet, PromptSpec, DEFAULT_USER_BUDGET};

/// Characters per token in the estimator.
pub const CHARS_PER_TOKEN: usize = 4;
/// Assumed reply length, e.g. `AI, 0.95`.
pub const ESTIMATED_OUTPUT_TOKENS: u64 = 8;

/// Abstract cost units per token.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelRate {
    pub input_rate: f64,
    pub output_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub rates: BTreeMap<String, ModelRate>,
}

impl Default for CostModel {
    /// gpt-4 is priced at exactly 20x gpt-3.5-turbo on both input and output.
    fn default() -> Self {
        let rates = [("gpt-3.5-turbo", 0.0015e-3, 0.002e-3), ("gpt-4", 0.03e-3, 0.04e-3)]
            .into_iter()
            .map(|(m, i, o)| {
                (
                    m.to_string(),
                    ModelRate {
                        input_rate: i,
                        output_rate: o,
                    },
                )
            })
            .collect();
        Self { rates }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<(), AnnotateError> {
        for (model, r) in &self.rates {
            if !(r.input_rate > 0.0 && r.output_rate > 0.0 && r.input_rate.is_finite() && r.output_rate.is_finite()) {
                return Err(AnnotateError::InvalidCostModel(format!(
                    "rates for {model} must be positive"
                )));
            }
        }
        Ok(())
    }

    /// Exact name, or the longest configured name that prefixes `model` at a
    /// `-` boundary (`gpt-4-0613` uses `gpt-4`, `gpt-4o` does not).
    pub fn rate(&self, model: &str) -> Result<ModelRate, AnnotateError> {
        if let Some(r) = self.rates.get(model) {
            return Ok(*r);
        }
        self.rates
            .iter()
            .filter(|(name, _)| {
                model
                    .strip_prefix(name.as_str())
                    .is_some_and(|rest| rest.starts_with('-'))
            })
            .max_by_key(|(name, _)| name.len())
            .map(|(_, r)| *r)
            .ok_or_else(|| AnnotateError::UnknownModel {
                model: model.to_string(),
                known: self.rates.keys().cloned().collect::<Vec<_>>().join(", "),
            })
    }

    pub fn cost(&self, model: &str, input_tokens: u64, output_tokens: u64) -> Result<f64, AnnotateError> {
        let r = self.rate(model)?;
        Ok(input_tokens as f64 * r.input_rate + output_tokens as f64 * r.output_rate)
    }
}

/// `ceil(chars / 4)`.
pub fn estimate_tokens(text: &str) -> u64 {
    text.chars().count().div_ceil(CHARS_PER_TOKEN) as u64
}

/// Estimated cost of annotating `pubs` with one prompt.
///
/// Input tokens come from the system prompt plus each user message; output
/// is a fixed [`ESTIMATED_OUTPUT_TOKENS`] per publication.
pub fn estimate_cost(
    pubs: &[Publication],
    prompts: &PromptSet,
    spec: PromptSpec,
    params: &ChatParams,
    cost_model: &CostModel,
) -> Result<f64, AnnotateError> {
    let rate = cost_model.rate(&params.model)?;
    let system_tokens = estimate_tokens(&prompts.render(spec)?.system_text);
    let mut input = 0u64;
    for p in pubs {
        input += system_tokens + estimate_tokens(&build_user_message(p, DEFAULT_USER_BUDGET)?.text);
    }
    let output = ESTIMATED_OUTPUT_TOKENS * pubs.len() as u64;
    Ok(input as f64 * rate.input_rate + output as f64 * rate.output_rate)
}
