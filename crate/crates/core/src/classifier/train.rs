use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{featurize, FeatureVector, FeaturizerConfig};
use super::model::LinearModel;
use super::objective::{sigmoid, Sample};
use super::ClassifierError;
use crate::corpus::{LabelValue, Publication};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub max_train_samples: usize,
    pub max_eval_samples: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Inverse-frequency sample weights so both classes carry equal mass.
    pub class_weighting: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_train_samples: 30_000,
            max_eval_samples: 10_000,
            epochs: 10,
            learning_rate: 0.1,
            l2: 1e-5,
            batch_size: 64,
            seed: 42,
            class_weighting: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |what: &str| Err(ClassifierError::InvalidConfig(what.to_string()));
        if self.max_train_samples == 0 || self.max_eval_samples == 0 {
            return bad("sample caps must be positive");
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be positive");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return bad("l2 must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Full regularised training loss after the epoch.
    pub loss: f64,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub train_size: usize,
    pub val_size: usize,
    pub epochs: Vec<EpochLog>,
}

impl TrainingLog {
    /// `epoch,loss,val_accuracy` rows; a missing accuracy is an empty field.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,val_accuracy\n");
        for e in &self.epochs {
            let acc = e.val_accuracy.map(|a| a.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{}", e.epoch, e.loss, acc);
        }
        out
    }
}

/// Weights stored as `scale * v` so the L2 shrink is O(1) per step.
struct ScaledWeights {
    v: Vec<f64>,
    scale: f64,
}

impl ScaledWeights {
    fn dot(&self, x: &FeatureVector) -> f64 {
        self.scale * x.dot(&self.v)
    }

    fn shrink(&mut self, factor: f64) {
        self.scale *= factor;
        if self.scale < 1e-9 {
            self.v.iter_mut().for_each(|w| *w *= self.scale);
            self.scale = 1.0;
        }
    }

    fn materialize(&self) -> Vec<f64> {
        self.v.iter().map(|w| w * self.scale).collect()
    }
}

fn capped<T>(mut items: Vec<T>, cap: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
    items.shuffle(rng);
    items.truncate(cap);
    items
}

/// Trains on publications. See [`train_samples`].
pub fn train(
    train_set: &[(&Publication, LabelValue)],
    val_set: &[(&Publication, LabelValue)],
    featurizer: &FeaturizerConfig,
    config: &TrainConfig,
) -> Result<(LinearModel, TrainingLog), ClassifierError> {
    let vec_of = |set: &[(&Publication, LabelValue)]| -> Vec<(FeatureVector, LabelValue)> {
        set.iter()
            .map(|(p, l)| (featurize(&p.title, &p.abstract_text, featurizer), *l))
            .collect()
    };
    train_samples(vec_of(train_set), vec_of(val_set), featurizer, config)
}

/// Trains on pre-featurised rows.
///
/// Both sets are shuffled with the seeded generator and truncated to their
/// caps before anything else. Each epoch visits the training rows in a fresh
/// seeded order, in mini-batches, applying the averaged logistic gradient
/// plus the L2 term to the weights (not the bias).
pub fn train_samples(
    train_set: Vec<(FeatureVector, LabelValue)>,
    val_set: Vec<(FeatureVector, LabelValue)>,
    featurizer: &FeaturizerConfig,
    config: &TrainConfig,
) -> Result<(LinearModel, TrainingLog), ClassifierError> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    let dim = featurizer.dim;
    if let Some((x, _)) = train_set.iter().chain(&val_set).find(|(x, _)| x.dim != dim) {
        return Err(ClassifierError::DimensionMismatch {
            expected: dim,
            found: x.dim,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let train_set = capped(train_set, config.max_train_samples, &mut rng);
    let val_set = capped(val_set, config.max_eval_samples, &mut rng);

    let n_pos = train_set.iter().filter(|(_, l)| l.is_ai()).count();
    let n_neg = train_set.len() - n_pos;
    if n_pos == 0 {
        return Err(ClassifierError::SingleClass("Non-AI"));
    }
    if n_neg == 0 {
        return Err(ClassifierError::SingleClass("AI"));
    }
    let n = train_set.len() as f64;
    let (w_pos, w_neg) = if config.class_weighting {
        (n / (2.0 * n_pos as f64), n / (2.0 * n_neg as f64))
    } else {
        (1.0, 1.0)
    };
    let samples: Vec<Sample> = train_set
        .into_iter()
        .map(|(x, l)| Sample {
            x,
            y: if l.is_ai() { 1.0 } else { 0.0 },
            weight: if l.is_ai() { w_pos } else { w_neg },
        })
        .collect();

    let mut w = ScaledWeights {
        v: vec![0.0; dim],
        scale: 1.0,
    };
    let mut bias = 0.0;
    let lr = config.learning_rate;
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut log = TrainingLog {
        train_size: samples.len(),
        val_size: val_set.len(),
        epochs: Vec::with_capacity(config.epochs),
    };

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for (batch, chunk) in order.chunks(config.batch_size).enumerate() {
            let b = chunk.len() as f64;
            let residuals: Vec<f64> = chunk
                .iter()
                .map(|&i| {
                    let s = &samples[i];
                    s.weight * (sigmoid(w.dot(&s.x) + bias) - s.y) / b
                })
                .collect();
            if residuals.iter().any(|r| !r.is_finite()) {
                return Err(non_finite(epoch, batch, f64::NAN, &w, bias));
            }
            w.shrink(1.0 - lr * config.l2);
            let step = lr / w.scale;
            for (&i, r) in chunk.iter().zip(&residuals) {
                let x = &samples[i].x;
                for (&j, &v) in x.indices.iter().zip(&x.values) {
                    w.v[j as usize] -= step * r * v;
                }
            }
            bias -= lr * residuals.iter().sum::<f64>();
        }

        let weights = w.materialize();
        let loss = super::objective::loss(&weights, bias, &samples, config.l2);
        if !loss.is_finite() {
            return Err(non_finite(
                epoch,
                order.len().div_ceil(config.batch_size),
                loss,
                &w,
                bias,
            ));
        }
        let val_accuracy = (!val_set.is_empty()).then(|| {
            let correct = val_set
                .iter()
                .filter(|(x, l)| (sigmoid(x.dot(&weights) + bias) >= 0.5) == l.is_ai())
                .count();
            correct as f64 / val_set.len() as f64
        });
        log::debug!("epoch {epoch}: loss {loss:.6} val_accuracy {val_accuracy:?}");
        log.epochs.push(EpochLog {
            epoch,
            loss,
            val_accuracy,
        });
    }

    let model = LinearModel::new(*featurizer, config.clone(), w.materialize(), bias);
    Ok((model, log))
}

fn non_finite(epoch: usize, batch: usize, loss: f64, w: &ScaledWeights, bias: f64) -> ClassifierError {
    let max_abs_weight = w.v.iter().fold(0.0f64, |m, x| m.max((x * w.scale).abs()));
    ClassifierError::NonFiniteLoss {
        epoch,
        batch,
        loss,
        max_abs_weight,
        bias,
    }
}
