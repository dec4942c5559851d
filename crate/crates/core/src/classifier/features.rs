use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::hashing::fnv1a64;

/// Hashing dimension and word n-gram orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeaturizerConfig {
    pub dim: usize,
    pub min_n: usize,
    pub max_n: usize,
}

impl Default for FeaturizerConfig {
    fn default() -> Self {
        Self {
            dim: 1 << 18,
            min_n: 1,
            max_n: 2,
        }
    }
}

/// Sparse L2-normalised feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    /// Strictly increasing indices in `[0, dim)`.
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
    pub dim: usize,
}

impl FeatureVector {
    /// Normalises raw counts keyed by index.
    pub fn from_counts(counts: BTreeMap<u32, f64>, dim: usize) -> Self {
        let norm = counts.values().map(|v| v * v).sum::<f64>().sqrt();
        let (indices, values) = counts
            .into_iter()
            .map(|(i, v)| (i, if norm > 0.0 { v / norm } else { v }))
            .unzip();
        Self { indices, values, dim }
    }

    /// True for texts with no tokens at all.
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn dot(&self, weights: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&i, &v)| weights[i as usize] * v)
            .sum()
    }
}

/// Lowercases and splits on anything that is not alphanumeric.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Word n-grams of orders `min_n..=max_n`, space-joined.
pub fn ngrams(tokens: &[String], min_n: usize, max_n: usize) -> Vec<String> {
    let mut out = Vec::new();
    for n in min_n.max(1)..=max_n {
        out.extend(tokens.windows(n).map(|w| w.join(" ")));
    }
    out
}

/// Title and abstract tokens, in that order.
pub fn document_tokens(title: &str, abstract_text: &str) -> Vec<String> {
    let mut tokens = tokenize(title);
    tokens.extend(tokenize(abstract_text));
    tokens
}

/// Hashes n-gram counts into `[0, dim)` and L2-normalises.
///
/// Two empty inputs give the zero vector, which [`FeatureVector::is_empty`]
/// reports.
pub fn featurize(title: &str, abstract_text: &str, config: &FeaturizerConfig) -> FeatureVector {
    let tokens = document_tokens(title, abstract_text);
    let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
    for gram in ngrams(&tokens, config.min_n, config.max_n) {
        let idx = (fnv1a64(gram.as_bytes()) % config.dim as u64) as u32;
        *counts.entry(idx).or_insert(0.0) += 1.0;
    }
    FeatureVector::from_counts(counts, config.dim)
}
