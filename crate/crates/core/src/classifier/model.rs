use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::features::{featurize, FeatureVector, FeaturizerConfig};
use super::objective::sigmoid;
use super::train::TrainConfig;
use super::ClassifierError;
use crate::corpus::{LabelValue, Publication};
use crate::evalkit::{confusion, metrics, EvalError, MetricsReport};

pub const MODEL_MAGIC: &[u8; 8] = b"ANBLINR\0";
pub const MODEL_VERSION: u32 = 1;

/// Weights over hashed features plus bias and decision threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub featurizer: FeaturizerConfig,
    pub train_config: TrainConfig,
    pub weights: Vec<f64>,
    pub bias: f64,
    threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: LabelValue,
    pub score: f64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    featurizer: FeaturizerConfig,
    train_config: TrainConfig,
}

impl LinearModel {
    pub fn new(featurizer: FeaturizerConfig, train_config: TrainConfig, weights: Vec<f64>, bias: f64) -> Self {
        Self {
            featurizer,
            train_config,
            weights,
            bias,
            threshold: 0.5,
        }
    }

    /// Zero weights and bias.
    pub fn zeros(featurizer: FeaturizerConfig) -> Self {
        Self::new(featurizer, TrainConfig::default(), vec![0.0; featurizer.dim], 0.0)
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn set_threshold(&mut self, threshold: f64) -> Result<(), ClassifierError> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(ClassifierError::InvalidThreshold(threshold));
        }
        self.threshold = threshold;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn score_vector(&self, x: &FeatureVector) -> Result<f64, ClassifierError> {
        if x.dim != self.dim() {
            return Err(ClassifierError::DimensionMismatch {
                expected: self.dim(),
                found: x.dim,
            });
        }
        // Saturated logits would round to exactly 0 or 1.
        Ok(sigmoid(x.dot(&self.weights) + self.bias).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0))
    }

    pub fn predict_vector(&self, x: &FeatureVector) -> Result<Prediction, ClassifierError> {
        let score = self.score_vector(x)?;
        Ok(Prediction {
            label: LabelValue::from_is_ai(score >= self.threshold),
            score,
        })
    }

    pub fn predict(&self, publication: &Publication) -> Result<Prediction, ClassifierError> {
        self.predict_text(&publication.title, &publication.abstract_text)
    }

    pub fn predict_text(&self, title: &str, abstract_text: &str) -> Result<Prediction, ClassifierError> {
        self.predict_vector(&featurize(title, abstract_text, &self.featurizer))
    }

    /// Metrics over `(publication, gold)` pairs.
    pub fn evaluate(&self, dataset: &[(&Publication, LabelValue)]) -> Result<MetricsReport, ClassifierError> {
        if dataset.is_empty() {
            return Err(EvalError::EmptyInput("evaluate").into());
        }
        let pairs = dataset
            .iter()
            .map(|(p, gold)| Ok((self.predict(p)?.label, *gold)))
            .collect::<Result<Vec<_>, ClassifierError>>()?;
        Ok(metrics(confusion(pairs)?)?)
    }

    /// Binary layout: magic, u32 version, u32 header length, JSON header,
    /// f64 bias, f64 threshold, u64 weight count, then the weights. All
    /// integers and floats are little-endian.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), ClassifierError> {
        let header = serde_json::to_vec(&Header {
            featurizer: self.featurizer,
            train_config: self.train_config.clone(),
        })?;
        w.write_all(MODEL_MAGIC)?;
        w.write_all(&MODEL_VERSION.to_le_bytes())?;
        w.write_all(&(header.len() as u32).to_le_bytes())?;
        w.write_all(&header)?;
        w.write_all(&self.bias.to_le_bytes())?;
        w.write_all(&self.threshold.to_le_bytes())?;
        w.write_all(&(self.weights.len() as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.weights.len() * 8);
        for x in &self.weights {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, ClassifierError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MODEL_MAGIC {
            return Err(ClassifierError::Format("not a model file (bad magic)".into()));
        }
        let version = read_u32(&mut r)?;
        if version != MODEL_VERSION {
            return Err(ClassifierError::Format(format!(
                "unsupported version {version} (expected {MODEL_VERSION})"
            )));
        }
        let header_len = read_u32(&mut r)? as usize;
        let mut header = vec![0u8; header_len];
        r.read_exact(&mut header)?;
        let header: Header = serde_json::from_slice(&header)?;
        let bias = read_f64(&mut r)?;
        let threshold = read_f64(&mut r)?;
        let n = read_u64(&mut r)? as usize;
        if n != header.featurizer.dim {
            return Err(ClassifierError::Format(format!(
                "{n} weights for featurizer dimension {}",
                header.featurizer.dim
            )));
        }
        let mut raw = vec![0u8; n * 8];
        r.read_exact(&mut raw)?;
        let weights: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        if !weights.iter().all(|w| w.is_finite()) || !bias.is_finite() {
            return Err(ClassifierError::Format("non-finite weights".into()));
        }
        let mut model = LinearModel::new(header.featurizer, header.train_config, weights, bias);
        model
            .set_threshold(threshold)
            .map_err(|_| ClassifierError::Format(format!("threshold {threshold} outside (0, 1)")))?;
        Ok(model)
    }
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> std::io::Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Source;
    use proptest::prelude::*;

    fn small() -> FeaturizerConfig {
        FeaturizerConfig {
            dim: 64,
            ..Default::default()
        }
    }

    #[test]
    fn zero_model_scores_one_half() {
        let m = LinearModel::zeros(small());
        let p = m.predict_text("anything", "at all").unwrap();
        assert_eq!(p.score, 0.5);
        assert_eq!(p.label, LabelValue::Ai);
    }

    #[test]
    fn dimension_mismatch() {
        let m = LinearModel::zeros(small());
        let x = featurize("a", "", &FeaturizerConfig { dim: 128, ..small() });
        assert!(matches!(
            m.predict_vector(&x),
            Err(ClassifierError::DimensionMismatch {
                expected: 64,
                found: 128
            })
        ));
    }

    #[test]
    fn positive_weight_raises_score() {
        let cfg = small();
        let mut m = LinearModel::zeros(cfg);
        let x = featurize("neural", "", &FeaturizerConfig { max_n: 1, ..cfg });
        let before = m.score_vector(&x).unwrap();
        m.weights[x.indices[0] as usize] = 0.7;
        assert!(m.score_vector(&x).unwrap() > before);
    }

    #[test]
    fn threshold_flip_changes_only_that_label() {
        let cfg = small();
        let mut m = LinearModel::zeros(cfg);
        m.bias = 0.3;
        let x = featurize("some words", "", &cfg);
        let p = m.predict_vector(&x).unwrap();
        assert_eq!(p.label, LabelValue::Ai);
        m.set_threshold((p.score + 1.0) / 2.0).unwrap();
        let q = m.predict_vector(&x).unwrap();
        assert_eq!(q.label, LabelValue::NonAi);
        assert_eq!(q.score, p.score);
        assert!(m.set_threshold(1.0).is_err());
    }

    #[test]
    fn evaluate_fixture() {
        let cfg = FeaturizerConfig { max_n: 1, ..small() };
        let mut m = LinearModel::zeros(cfg);
        let ai = featurize("ai", "", &cfg).indices[0] as usize;
        m.weights[ai] = 5.0;
        m.bias = -1.0;
        let mk = |id: &str, title: &str| Publication::new(id, Source::Arxiv, title, "", 2020);
        let pubs: Vec<Publication> = (0..10)
            .map(|i| mk(&format!("p{i}"), if i < 3 { "ai" } else { "other" }))
            .collect();
        // predictions: p0..p2 AI, rest Non-AI. Gold: p0,p1,p3 AI.
        let gold = |i: usize| LabelValue::from_is_ai(matches!(i, 0 | 1 | 3));
        let data: Vec<_> = pubs.iter().enumerate().map(|(i, p)| (p, gold(i))).collect();
        let r = m.evaluate(&data).unwrap();
        assert_eq!((r.counts.tp, r.counts.fp, r.counts.fn_, r.counts.tn), (2, 1, 1, 6));
        assert!((r.accuracy - 0.8).abs() < 1e-12);
        assert!(m.evaluate(&[]).is_err());
    }

    #[test]
    fn binary_roundtrip() {
        let mut m = LinearModel::zeros(small());
        m.weights[3] = -1.25e-7;
        m.bias = 0.1 + 0.2;
        m.set_threshold(0.42).unwrap();
        let bytes = m.to_bytes();
        let back = LinearModel::read_from(bytes.as_slice()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_bytes(), bytes);
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(LinearModel::read_from(bad.as_slice()).is_err());
        assert!(LinearModel::read_from(&bytes[..bytes.len() - 1]).is_err());
    }

    proptest! {
        #[test]
        fn scores_in_open_unit_interval(bias in -50.0f64..50.0, w in -50.0f64..50.0, title in "[a-z ]{0,30}") {
            let mut m = LinearModel::zeros(small());
            m.bias = bias;
            m.weights.iter_mut().for_each(|x| *x = w);
            let s = m.predict_text(&title, "").unwrap().score;
            prop_assert!(s > 0.0 && s < 1.0);
        }
    }
}
