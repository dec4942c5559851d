//! Run configuration: a TOML file plus command-line overrides.
//!
//! Relative paths in the file are resolved against the file's directory.

use std::path::{Path, PathBuf};

use annobench::annotator::{ChatParams, CostModel};
use annobench::classifier::{FeaturizerConfig, TrainConfig};
use annobench::corpus::SplitRatios;
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

pub const DEFAULT_SEED: u64 = 42;

/// Per-field overrides of the default chat parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamOverrides {
    pub temperature: Option<f64>,
    pub top_p: Option<f64>,
    pub n: Option<u32>,
    pub presence_penalty: Option<f64>,
    pub frequency_penalty: Option<f64>,
}

impl ParamOverrides {
    pub fn apply(&self, mut p: ChatParams) -> ChatParams {
        if let Some(v) = self.temperature {
            p.temperature = v;
        }
        if let Some(v) = self.top_p {
            p.top_p = v;
        }
        if let Some(v) = self.n {
            p.n = v;
        }
        if let Some(v) = self.presence_penalty {
            p.presence_penalty = v;
        }
        if let Some(v) = self.frequency_penalty {
            p.frequency_penalty = v;
        }
        p
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub corpus: Vec<PathBuf>,
    pub prompt_file: Option<PathBuf>,
    pub model: Option<String>,
    pub params: ParamOverrides,
    pub cache_dir: Option<PathBuf>,
    /// `live`, `replay:<fixture.jsonl>` or `mock:<script.json>`.
    pub backend: Option<String>,
    pub base_url: Option<String>,
    pub concurrency: Option<usize>,
    pub requests_per_minute: Option<u32>,
    pub split: Option<SplitRatios>,
    pub train: Option<TrainConfig>,
    pub featurizer: Option<FeaturizerConfig>,
    pub cost: Option<CostModel>,
    pub venues: Option<PathBuf>,
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.corpus.iter_mut().for_each(|p| resolve(base, p));
        for p in [
            &mut cfg.output_dir,
            &mut cfg.prompt_file,
            &mut cfg.cache_dir,
            &mut cfg.venues,
        ]
        .into_iter()
        .flatten()
        {
            resolve(base, p);
        }
        if let Some(b) = &mut cfg.backend {
            if let Some((kind, file)) = b.split_once(':') {
                let mut file = PathBuf::from(file);
                resolve(base, &mut file);
                *b = format!("{kind}:{}", file.display());
            }
        }
        cfg.check_paths()?;
        Ok(cfg)
    }

    /// Every input path named by the config must exist.
    pub fn check_paths(&self) -> Result<()> {
        let mut inputs: Vec<&Path> = self.corpus.iter().map(PathBuf::as_path).collect();
        inputs.extend(self.prompt_file.as_deref());
        inputs.extend(self.venues.as_deref());
        let backend_file = self
            .backend
            .as_deref()
            .and_then(|b| b.split_once(':'))
            .map(|(_, f)| Path::new(f));
        inputs.extend(backend_file);
        for p in inputs {
            if !p.exists() {
                bail!("config refers to {}, which does not exist", p.display());
            }
        }
        if let Some(r) = &self.split {
            r.validate()?;
        }
        if let Some(t) = &self.train {
            t.validate()?;
        }
        if let Some(c) = &self.cost {
            c.validate()?;
        }
        Ok(())
    }
}
