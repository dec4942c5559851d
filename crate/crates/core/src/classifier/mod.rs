//! Baseline text classifier: hashed word n-grams and L2-regularised
//! logistic regression trained by mini-batch gradient descent.
//!
//! Training is single-threaded; the same data, config and seed always produce
//! the same model bytes.

mod features;
mod model;
mod objective;
mod train;

pub use features::{document_tokens, featurize, ngrams, tokenize, FeatureVector, FeaturizerConfig};
pub use model::{LinearModel, Prediction, MODEL_MAGIC, MODEL_VERSION};
pub use objective::{loss, loss_and_gradient, sigmoid, Sample};
pub use train::{train, train_samples, EpochLog, TrainConfig, TrainingLog};

use thiserror::Error;

use crate::evalkit::EvalError;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("training set has a single class ({0}); need both AI and Non-AI examples")]
    SingleClass(&'static str),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss {loss} at epoch {epoch} (batch {batch}, max |w| = {max_abs_weight}, bias = {bias})")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        loss: f64,
        max_abs_weight: f64,
        bias: f64,
    },
    #[error("feature dimension {found} does not match model dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("threshold must lie in (0, 1), got {0}")]
    InvalidThreshold(f64),
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
