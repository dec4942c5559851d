//! train and eval.

use std::collections::HashMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use annobench::adapter::{run_adapter, AdapterHyperparameters, AdapterJob, JOB_SCHEMA_VERSION};
use annobench::annotator::{read_records, AnnotationRecord};
use annobench::classifier::{self, LinearModel, TrainConfig};
use annobench::corpus::{Dataset, Example, Label, LabelValue, Provenance, Publication, SplitName};
use annobench::evalkit::{
    category_accuracy, confusion, emit_report, median_probability_by_cell, metrics, Format, Judgement, Report,
    SliceDescriptor,
};
use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::data::{index_corpus, load_corpus, load_dataset, write_dataset_file};
use crate::Ctx;

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset CSV with train and validation splits.
    #[arg(long)]
    pub labels: PathBuf,
    /// Corpus JSONL with the texts (repeatable); defaults to the config's.
    #[arg(long)]
    pub corpus: Vec<PathBuf>,
    /// Chatbot annotations replacing the gold labels of training rows.
    /// Rows without a parsed annotation are left out of training.
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    #[arg(short, long, default_value = "model.bin")]
    pub output: PathBuf,
    /// Training log CSV [default: the output path with extension `log.csv`].
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_train_samples: Option<usize>,
    #[arg(long)]
    pub max_eval_samples: Option<usize>,
    /// Weight classes by inverse frequency.
    #[arg(long)]
    pub class_weighting: bool,
    /// Hashing dimension.
    #[arg(long)]
    pub dim: Option<usize>,
    /// External trainer command (whitespace-separated), run as
    /// `<cmd> train --job <job.json>` instead of the built-in classifier.
    #[arg(long)]
    pub adapter: Option<String>,
    #[arg(long, default_value = "allenai/specter")]
    pub adapter_model: String,
}

fn annotation_map(path: &Path) -> Result<HashMap<String, AnnotationRecord>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_records(std::io::BufReader::new(f))?
        .into_iter()
        .map(|r| (r.publication_id.clone(), r))
        .collect())
}

/// The dataset with training labels swapped for chatbot labels.
fn training_dataset(ds: &Dataset, annotations: Option<&HashMap<String, AnnotationRecord>>) -> (Dataset, usize) {
    let Some(ann) = annotations else {
        return (ds.clone(), 0);
    };
    let mut dropped = 0;
    let examples = ds
        .examples
        .iter()
        .filter_map(|e| {
            if e.split != Some(SplitName::Train) {
                return Some(e.clone());
            }
            match ann.get(&e.publication_id).and_then(|r| r.parsed) {
                Some(p) => Some(Example {
                    label: Label::new(p.label, Provenance::Chatbot, Some(p.probability)).ok()?,
                    ..e.clone()
                }),
                None => {
                    dropped += 1;
                    None
                }
            }
        })
        .collect();
    (Dataset::new(ds.name.clone(), examples), dropped)
}

fn split_pairs<'a>(
    ds: &Dataset,
    split: SplitName,
    index: &HashMap<&str, &'a Publication>,
) -> Result<Vec<(&'a Publication, LabelValue)>> {
    ds.in_split(split)
        .map(|e| match index.get(e.publication_id.as_str()) {
            Some(p) => Ok((*p, e.label.value)),
            None => bail!(
                "publication {} is in the dataset but not in the corpus",
                e.publication_id
            ),
        })
        .collect()
}

pub fn train(ctx: &Ctx, a: TrainArgs) -> Result<()> {
    let ds = load_dataset(&a.labels)?;
    if ds.examples.iter().all(|e| e.split.is_none()) {
        bail!(
            "{} has no split column values; run `annobench split` first",
            a.labels.display()
        );
    }
    let ann = a.annotations.as_deref().map(annotation_map).transpose()?;
    let (ds, dropped) = training_dataset(&ds, ann.as_ref());
    if dropped > 0 {
        eprintln!("{dropped} training rows had no parsed annotation and were left out");
    }
    let corpus_paths = ctx.corpus_paths(&a.corpus);

    let mut config = ctx.config.train.clone().unwrap_or_default();
    config.seed = ctx.seed;
    if let Some(v) = a.epochs {
        config.epochs = v;
    }
    if let Some(v) = a.learning_rate {
        config.learning_rate = v;
    }
    if let Some(v) = a.l2 {
        config.l2 = v;
    }
    if let Some(v) = a.batch_size {
        config.batch_size = v;
    }
    if let Some(v) = a.max_train_samples {
        config.max_train_samples = v;
    }
    if let Some(v) = a.max_eval_samples {
        config.max_eval_samples = v;
    }
    config.class_weighting |= a.class_weighting;
    config.validate()?;

    if let Some(cmd) = &a.adapter {
        return train_with_adapter(ctx, cmd, &a.adapter_model, &ds, &corpus_paths, &config);
    }

    let mut featurizer = ctx.config.featurizer.unwrap_or_default();
    if let Some(d) = a.dim {
        featurizer.dim = d;
    }
    let pubs = load_corpus(&corpus_paths)?;
    let index = index_corpus(&pubs);
    let train_set = split_pairs(&ds, SplitName::Train, &index)?;
    let val_set = split_pairs(&ds, SplitName::Validation, &index)?;
    let (model, log) = classifier::train(&train_set, &val_set, &featurizer, &config)?;

    let out = ctx.out(&a.output)?;
    model.write_to(std::io::BufWriter::new(File::create(&out)?))?;
    let log_path = a.log.clone().unwrap_or_else(|| a.output.with_extension("log.csv"));
    let log_path = ctx.write(&log_path, log.to_csv().as_bytes())?;
    let last = log.epochs.last().expect("at least one epoch");
    println!(
        "trained on {} examples ({} validation), {} epochs: loss {:.6}, validation accuracy {} -> {} (log {})",
        log.train_size,
        log.val_size,
        last.epoch,
        last.loss,
        last.val_accuracy.map_or("n/a".to_string(), |v| format!("{v:.4}")),
        out.display(),
        log_path.display()
    );
    Ok(())
}

fn absolute(p: &Path) -> Result<PathBuf> {
    std::fs::canonicalize(p).with_context(|| format!("resolving {}", p.display()))
}

fn train_with_adapter(
    ctx: &Ctx,
    cmd: &str,
    model: &str,
    ds: &Dataset,
    corpus: &[PathBuf],
    config: &TrainConfig,
) -> Result<()> {
    let program: Vec<String> = cmd.split_whitespace().map(String::from).collect();
    let dir = ctx
        .out(Path::new("adapter/job.json"))?
        .parent()
        .expect("has parent")
        .to_path_buf();
    let mut paths = HashMap::new();
    for split in [SplitName::Train, SplitName::Validation, SplitName::Test] {
        let examples: Vec<Example> = ds.in_split(split).cloned().collect();
        if examples.is_empty() {
            continue;
        }
        let name = format!("{split:?}").to_lowercase();
        let path = write_dataset_file(
            ctx,
            &Path::new("adapter").join(format!("{name}.csv")),
            &Dataset::new(&name, examples),
        )?;
        paths.insert(split, absolute(&path)?);
    }
    let (Some(train), Some(validation)) = (paths.remove(&SplitName::Train), paths.remove(&SplitName::Validation))
    else {
        bail!("the adapter needs non-empty train and validation splits");
    };
    let dir = absolute(&dir)?;
    let job = AdapterJob {
        schema_version: JOB_SCHEMA_VERSION,
        model: model.to_string(),
        corpus: corpus.iter().map(|p| absolute(p)).collect::<Result<_>>()?,
        train,
        validation,
        test: paths.remove(&SplitName::Test),
        output_dir: dir.join("model"),
        metrics_path: dir.join("metrics.json"),
        hyperparameters: AdapterHyperparameters {
            max_train_samples: config.max_train_samples as u64,
            max_eval_samples: config.max_eval_samples as u64,
            seed: config.seed,
            ..Default::default()
        },
        hardware: serde_json::json!({"tpu_num_cores": 8, "bf16": true}),
    };
    let reports = run_adapter(&program, &job, &dir.join("job.json"))?;
    print!(
        "{}",
        String::from_utf8(emit_report(Report::Metrics(&reports), Format::Markdown)?)?
    );
    println!("adapter metrics -> {}", job.metrics_path.display());
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitSel {
    All,
    Train,
    Test,
    Validation,
}

impl SplitSel {
    fn name(self) -> Option<SplitName> {
        match self {
            SplitSel::All => None,
            SplitSel::Train => Some(SplitName::Train),
            SplitSel::Test => Some(SplitName::Test),
            SplitSel::Validation => Some(SplitName::Validation),
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Trained baseline model.
    #[arg(long, conflicts_with = "annotations", required_unless_present = "annotations")]
    pub model: Option<PathBuf>,
    /// Annotation records to score against the gold labels.
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    /// Gold dataset CSV.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "all")]
    pub split: SplitSel,
    /// Metrics output [default: stdout].
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    pub format: String,
    /// Per-publication predictions CSV (publication_id,venue,label,score,gold).
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Per-category accuracy table; format from the extension.
    #[arg(long)]
    pub categories: Option<PathBuf>,
    /// Median probability per confusion cell; format from the extension.
    #[arg(long)]
    pub medians: Option<PathBuf>,
    /// Decision threshold for the model.
    #[arg(long)]
    pub threshold: Option<f64>,
}

/// One row of a predictions CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub publication_id: String,
    pub venue: Option<String>,
    pub label: LabelValue,
    pub score: f64,
    pub gold: Option<LabelValue>,
}

fn format_for(path: &Path, fallback: &str) -> Result<Format> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or(fallback);
    Ok(ext.parse().or_else(|_| fallback.parse())?)
}

pub fn eval(ctx: &Ctx, a: EvalArgs) -> Result<()> {
    let corpus_paths = ctx.corpus_paths(&a.corpus);
    let pubs = if corpus_paths.is_empty() {
        Vec::new()
    } else {
        load_corpus(&corpus_paths)?
    };
    let index = index_corpus(&pubs);
    let gold: Option<(String, Vec<(String, LabelValue)>)> = match &a.dataset {
        Some(p) => {
            let ds = load_dataset(p)?;
            let rows = ds
                .examples
                .iter()
                .filter(|e| a.split.name().is_none_or(|s| e.split == Some(s)))
                .map(|e| (e.publication_id.clone(), e.label.value))
                .collect();
            let name = match a.split.name() {
                Some(s) => format!("{}:{}", ds.name, format!("{s:?}").to_lowercase()),
                None => ds.name.clone(),
            };
            Some((name, rows))
        }
        None => None,
    };
    if gold.is_none() && a.predictions.is_none() {
        bail!("nothing to do: pass --dataset for metrics and/or --predictions");
    }

    let mut slice = SliceDescriptor::default();
    let mut rows: Vec<PredictionRow> = Vec::new();
    let mut excluded = 0usize;
    let venue_of = |id: &str| index.get(id).and_then(|p| p.venue.clone());

    if let Some(path) = &a.model {
        let mut model = LinearModel::read_from(std::io::BufReader::new(
            File::open(path).with_context(|| format!("opening {}", path.display()))?,
        ))?;
        if let Some(t) = a.threshold {
            model.set_threshold(t)?;
        }
        slice.model = Some("baseline".into());
        if pubs.is_empty() {
            bail!("the model needs texts; pass --corpus");
        }
        let targets: Vec<(String, Option<LabelValue>)> = match &gold {
            Some((_, g)) => g.iter().map(|(id, l)| (id.clone(), Some(*l))).collect(),
            None => pubs.iter().map(|p| (p.id.clone(), None)).collect(),
        };
        for (id, g) in targets {
            let p = index
                .get(id.as_str())
                .with_context(|| format!("publication {id} is in the dataset but not in the corpus"))?;
            let pred = model.predict(p)?;
            rows.push(PredictionRow {
                publication_id: id,
                venue: p.venue.clone(),
                label: pred.label,
                score: pred.score,
                gold: g,
            });
        }
    } else if let Some(path) = &a.annotations {
        let records = annotation_map(path)?;
        if let Some(r) = records.values().next() {
            slice.model = Some(r.params.model.clone());
            slice.prompt_id = Some(r.prompt_id.clone());
        }
        let targets: Vec<(String, Option<LabelValue>)> = match &gold {
            Some((_, g)) => g.iter().map(|(id, l)| (id.clone(), Some(*l))).collect(),
            None => {
                let mut ids: Vec<String> = records.keys().cloned().collect();
                ids.sort();
                ids.into_iter().map(|id| (id, None)).collect()
            }
        };
        for (id, g) in targets {
            match records.get(&id).and_then(|r| r.parsed) {
                Some(p) => rows.push(PredictionRow {
                    venue: venue_of(&id),
                    publication_id: id,
                    label: p.label,
                    score: p.probability,
                    gold: g,
                }),
                None => excluded += 1,
            }
        }
    }
    if excluded > 0 {
        eprintln!("{excluded} publications had no parsed annotation and were not scored");
    }

    if let Some(p) = &a.predictions {
        let out = ctx.out(p)?;
        let mut w = csv_writer(&out)?;
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }

    let Some((dataset_name, _)) = gold else {
        return Ok(());
    };
    slice.dataset = Some(dataset_name);
    let judged: Vec<&PredictionRow> = rows.iter().filter(|r| r.gold.is_some()).collect();
    let report = metrics(confusion(judged.iter().map(|r| (r.label, r.gold.expect("judged"))))?)?.with_slice(slice);
    let bytes = emit_report(Report::Metrics(std::slice::from_ref(&report)), a.format.parse()?)?;
    match &a.output {
        Some(p) => {
            ctx.write(p, &bytes)?;
        }
        None => print!("{}", String::from_utf8_lossy(&bytes)),
    }

    if let Some(path) = &a.categories {
        if pubs.is_empty() {
            bail!("--categories needs --corpus for the publications' categories");
        }
        let judgements: Vec<Judgement> = judged
            .iter()
            .filter_map(|r| {
                Some(Judgement {
                    publication: index.get(r.publication_id.as_str())?,
                    predicted: r.label,
                    gold: r.gold?,
                })
            })
            .collect();
        let table = category_accuracy(&judgements);
        ctx.write(
            path,
            &emit_report(Report::Categories(&table), format_for(path, "csv")?)?,
        )?;
    }
    if let Some(path) = &a.medians {
        let m = median_probability_by_cell(judged.iter().map(|r| (r.label, r.gold.expect("judged"), r.score)));
        ctx.write(path, &emit_report(Report::Medians(&m), format_for(path, "csv")?)?)?;
    }
    Ok(())
}

pub fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}
