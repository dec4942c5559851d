//! File contract with the optional external transformer trainer.
//!
//! The trainer is a separate program invoked as `<cmd> train --job job.json`.
//! It reads the job, fine-tunes, and writes a metrics document to
//! `metrics_path` in the same shape as [`MetricsReport`] (a single object or
//! an array). On failure it exits nonzero and prints a JSON object with an
//! `error` field on stdout.

use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evalkit::MetricsReport;

pub const JOB_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("invalid adapter job: {0}")]
    InvalidJob(String),
    #[error("could not start adapter `{cmd}`: {source}")]
    Spawn {
        cmd: String,
        #[source]
        source: std::io::Error,
    },
    #[error("adapter exited with {code:?}: {message}")]
    Failed { code: Option<i32>, message: String },
    #[error("invalid metrics document: {0}")]
    InvalidMetrics(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Fine-tuning hyperparameters, named as the trainer expects them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdapterHyperparameters {
    pub max_train_samples: u64,
    pub max_eval_samples: u64,
    pub max_seq_length: u64,
    pub evaluation_strategy: String,
    pub eval_steps: u64,
    pub per_device_train_batch_size: u64,
    pub per_device_eval_batch_size: u64,
    pub gradient_accumulation_steps: u64,
    pub num_train_epochs: f64,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for AdapterHyperparameters {
    fn default() -> Self {
        Self {
            max_train_samples: 30_000,
            max_eval_samples: 10_000,
            max_seq_length: 512,
            evaluation_strategy: "steps".into(),
            eval_steps: 100,
            per_device_train_batch_size: 16,
            per_device_eval_batch_size: 16,
            gradient_accumulation_steps: 4,
            num_train_epochs: 3.0,
            learning_rate: 5e-5,
            seed: 42,
        }
    }
}

/// Contents of `job.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterJob {
    pub schema_version: u32,
    /// Pretrained model identifier, e.g. `allenai/specter`.
    pub model: String,
    /// Publication JSONL files holding titles and abstracts.
    pub corpus: Vec<PathBuf>,
    /// Dataset CSVs (`publication_id,label,provenance,confidence,split`).
    pub train: PathBuf,
    pub validation: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub metrics_path: PathBuf,
    #[serde(default)]
    pub hyperparameters: AdapterHyperparameters,
    /// Free-form environment hints (accelerator cores, bf16); not binding.
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub hardware: serde_json::Value,
}

impl AdapterJob {
    pub fn validate(&self) -> Result<(), AdapterError> {
        let bad = |m: String| Err(AdapterError::InvalidJob(m));
        if self.schema_version != JOB_SCHEMA_VERSION {
            return bad(format!(
                "schema_version {} (expected {JOB_SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.model.trim().is_empty() {
            return bad("model is empty".into());
        }
        if self.corpus.is_empty() {
            return bad("no corpus files".into());
        }
        for p in self
            .corpus
            .iter()
            .chain([&self.train, &self.validation])
            .chain(self.test.as_ref())
        {
            if !p.exists() {
                return bad(format!("{} does not exist", p.display()));
            }
        }
        let h = &self.hyperparameters;
        let counts = [
            h.max_train_samples,
            h.max_eval_samples,
            h.max_seq_length,
            h.eval_steps,
            h.per_device_train_batch_size,
            h.per_device_eval_batch_size,
            h.gradient_accumulation_steps,
        ];
        if counts.contains(&0)
            || h.num_train_epochs.is_nan()
            || h.num_train_epochs <= 0.0
            || h.learning_rate.is_nan()
            || h.learning_rate <= 0.0
        {
            return bad("caps and hyperparameters must be positive".into());
        }
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<(), AdapterError> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        std::fs::write(path, bytes)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, AdapterError> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}

/// Checks a report for internal consistency: positive total, ratios in
/// `[0, 1]`, and accuracy agreeing with the counts to the 4 decimals that
/// emitted files carry.
pub fn validate_metrics(report: &MetricsReport) -> Result<(), AdapterError> {
    let c = report.counts;
    let total = c.total();
    if total == 0 {
        return Err(AdapterError::InvalidMetrics("counts sum to zero".into()));
    }
    for (name, v) in [
        ("accuracy", Some(report.accuracy)),
        ("precision", report.precision),
        ("recall", report.recall),
        ("f1", report.f1),
    ] {
        if let Some(v) = v {
            if !(0.0..=1.0).contains(&v) {
                return Err(AdapterError::InvalidMetrics(format!("{name} = {v} outside [0, 1]")));
            }
        }
    }
    let expected = (c.tp + c.tn) as f64 / total as f64;
    if (expected - report.accuracy).abs() > 5.1e-5 {
        return Err(AdapterError::InvalidMetrics(format!(
            "accuracy {} disagrees with counts ({expected:.6})",
            report.accuracy
        )));
    }
    Ok(())
}

/// Parses a metrics document: one report or an array of them.
pub fn parse_metrics(bytes: &[u8]) -> Result<Vec<MetricsReport>, AdapterError> {
    let value: serde_json::Value = serde_json::from_slice(bytes)?;
    let reports: Vec<MetricsReport> = if value.is_array() {
        serde_json::from_value(value)?
    } else {
        vec![serde_json::from_value(value)?]
    };
    if reports.is_empty() {
        return Err(AdapterError::InvalidMetrics("empty array".into()));
    }
    reports.iter().try_for_each(validate_metrics)?;
    Ok(reports)
}

/// Runs `program args.. train --job <job_path>` and loads its metrics.
pub fn run_adapter(program: &[String], job: &AdapterJob, job_path: &Path) -> Result<Vec<MetricsReport>, AdapterError> {
    job.validate()?;
    let (cmd, args) = program
        .split_first()
        .ok_or_else(|| AdapterError::InvalidJob("empty adapter command".into()))?;
    std::fs::create_dir_all(&job.output_dir)?;
    job.write(job_path)?;
    let out = Command::new(cmd)
        .args(args)
        .arg("train")
        .arg("--job")
        .arg(job_path)
        .output()
        .map_err(|source| AdapterError::Spawn {
            cmd: cmd.clone(),
            source,
        })?;
    if !out.status.success() {
        let stdout = String::from_utf8_lossy(&out.stdout);
        let message = serde_json::from_str::<serde_json::Value>(stdout.trim())
            .ok()
            .and_then(|v| v.get("error").map(|e| e.to_string()))
            .unwrap_or_else(|| String::from_utf8_lossy(&out.stderr).trim().to_string());
        return Err(AdapterError::Failed {
            code: out.status.code(),
            message,
        });
    }
    parse_metrics(&std::fs::read(&job.metrics_path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalkit::{confusion, metrics};
    use crate::LabelValue::{Ai, NonAi};

    #[test]
    fn parses_object_and_array() {
        let m = metrics(confusion([(Ai, Ai), (NonAi, Ai), (NonAi, NonAi)]).unwrap()).unwrap();
        let one = serde_json::to_vec(&m).unwrap();
        assert_eq!(parse_metrics(&one).unwrap(), vec![m.clone()]);
        let two = serde_json::to_vec(&vec![m.clone(), m]).unwrap();
        assert_eq!(parse_metrics(&two).unwrap().len(), 2);
    }

    #[test]
    fn extra_fields_are_tolerated() {
        let doc = br#"{"counts":{"tp":1,"fp":0,"fn":0,"tn":1},"accuracy":1.0,"splits":{"train":2}}"#;
        assert_eq!(parse_metrics(doc).unwrap()[0].counts.tp, 1);
    }

    #[test]
    fn inconsistent_metrics_rejected() {
        let doc = br#"{"counts":{"tp":1,"fp":0,"fn":0,"tn":1},"accuracy":0.5}"#;
        assert!(matches!(parse_metrics(doc), Err(AdapterError::InvalidMetrics(_))));
        let doc = br#"{"counts":{"tp":0,"fp":0,"fn":0,"tn":0},"accuracy":0}"#;
        assert!(parse_metrics(doc).is_err());
        let doc = br#"{"counts":{"tp":1,"fp":0,"fn":0,"tn":1},"accuracy":1.0,"f1":1.5}"#;
        assert!(parse_metrics(doc).is_err());
    }

    #[test]
    fn job_roundtrip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("d.csv");
        std::fs::write(&f, "").unwrap();
        let job = AdapterJob {
            schema_version: JOB_SCHEMA_VERSION,
            model: "allenai/specter".into(),
            corpus: vec![f.clone()],
            train: f.clone(),
            validation: f.clone(),
            test: None,
            output_dir: dir.path().join("out"),
            metrics_path: dir.path().join("out/metrics.json"),
            hyperparameters: AdapterHyperparameters::default(),
            hardware: serde_json::Value::Null,
        };
        job.validate().unwrap();
        let path = dir.path().join("job.json");
        job.write(&path).unwrap();
        assert_eq!(AdapterJob::read(&path).unwrap(), job);

        let missing = AdapterJob {
            train: dir.path().join("nope.csv"),
            ..job.clone()
        };
        assert!(missing.validate().is_err());
        let zero = AdapterJob {
            hyperparameters: AdapterHyperparameters {
                per_device_train_batch_size: 0,
                ..Default::default()
            },
            ..job
        };
        assert!(zero.validate().is_err());
    }
}
