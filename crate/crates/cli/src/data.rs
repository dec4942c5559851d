//! ingest, label, sample and split.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use annobench::corpus::{
    self, assign_arxiv_label, assign_concept_label, default_ai_categories, default_ai_concepts, Dataset, Example,
    FilterConfig, LineError, OpenAlexPager, Publication, SplitRatios, SplitStrategy, DEFAULT_OPENALEX_URL,
};
use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};

use crate::Ctx;

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SourceKind {
    Arxiv,
    Openalex,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    pub source: SourceKind,
    /// Input JSONL file. For openalex, an `http(s)://` base URL pages the
    /// works API instead (`api` is shorthand for the public endpoint).
    pub input: String,
    /// Corpus JSONL to write.
    pub output: PathBuf,
    #[arg(long)]
    pub min_year: Option<i32>,
    /// Drop publications with fewer citations (only where a count is known).
    #[arg(long)]
    pub min_citations: Option<u64>,
    /// Keep duplicate ids and duplicate title+abstract pairs.
    #[arg(long)]
    pub no_dedup: bool,
    /// API filter expression, e.g. `concepts.id:C41008148`.
    #[arg(long)]
    pub filter: Option<String>,
    #[arg(long)]
    pub mailto: Option<String>,
    #[arg(long)]
    pub max_pages: Option<usize>,
    /// Resume a paged walk from this cursor.
    #[arg(long, default_value = "*")]
    pub cursor: String,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

fn report_line_errors(errors: &[LineError]) {
    for e in errors.iter().take(10) {
        log::warn!("line {}: {}", e.line, e.reason);
    }
    if errors.len() > 10 {
        log::warn!("... {} more line errors", errors.len() - 10);
    }
}

pub fn ingest(ctx: &Ctx, a: IngestArgs) -> Result<()> {
    let (pubs, skipped, errors) = match a.source {
        SourceKind::Arxiv => {
            let r = corpus::ingest_arxiv(open(Path::new(&a.input))?);
            (r.publications, r.skipped, r.errors)
        }
        SourceKind::Openalex => {
            let r = if a.input == "api" || a.input.starts_with("http://") || a.input.starts_with("https://") {
                let base = if a.input == "api" {
                    DEFAULT_OPENALEX_URL
                } else {
                    a.input.as_str()
                };
                let mut pager = OpenAlexPager::new(base);
                if let Some(f) = &a.filter {
                    pager = pager.filter(f);
                }
                if let Some(m) = &a.mailto {
                    pager = pager.mailto(m);
                }
                pager.fetch_all(&a.cursor, a.max_pages)?
            } else {
                corpus::ingest_openalex(open(Path::new(&a.input))?)
            };
            if r.missing_abstract > 0 {
                log::info!("{} works had no abstract", r.missing_abstract);
            }
            (r.publications, 0, r.errors)
        }
    };
    report_line_errors(&errors);
    let read = pubs.len();

    let (pubs, filtered) = if a.min_year.is_some() || a.min_citations.is_some() {
        let cfg = FilterConfig {
            min_year: a.min_year.unwrap_or(i32::MIN),
            min_citations: a.min_citations.unwrap_or(0),
        };
        let f = corpus::filter_corpus(&pubs, cfg);
        let dropped = f.dropped_year + f.dropped_citations;
        (f.kept, dropped)
    } else {
        (pubs, 0)
    };
    let (pubs, duplicates) = if a.no_dedup {
        (pubs, 0)
    } else {
        let d = corpus::dedup(pubs);
        let n = d.duplicate_ids + d.duplicate_content;
        (d.kept, n)
    };

    let out = ctx.out(&a.output)?;
    corpus::write_corpus(std::io::BufWriter::new(File::create(&out)?), &pubs)?;
    println!(
        "ingested {} of {read} records -> {} (skipped {skipped}, errors {}, filtered {filtered}, duplicates {duplicates})",
        pubs.len(),
        out.display(),
        errors.len()
    );
    Ok(())
}

/// Reads and concatenates corpus files; ids must be unique across them.
pub fn load_corpus(paths: &[PathBuf]) -> Result<Vec<Publication>> {
    if paths.is_empty() {
        bail!("no corpus given; pass --corpus or set `corpus` in the config");
    }
    let mut all = Vec::new();
    let mut seen = BTreeSet::new();
    for p in paths {
        let pubs = corpus::read_corpus(open(p)?).with_context(|| format!("reading {}", p.display()))?;
        for pub_ in pubs {
            if !seen.insert(pub_.id.clone()) {
                bail!("publication {} appears in more than one corpus file", pub_.id);
            }
            all.push(pub_);
        }
    }
    Ok(all)
}

pub fn index_corpus(pubs: &[Publication]) -> HashMap<&str, &Publication> {
    pubs.iter().map(|p| (p.id.as_str(), p)).collect()
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ds = corpus::read_dataset(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
        &name,
    )
    .with_context(|| format!("reading {}", path.display()))?;
    ds.validate()?;
    Ok(ds)
}

pub fn write_dataset_file(ctx: &Ctx, path: &Path, ds: &Dataset) -> Result<PathBuf> {
    let out = ctx.out(path)?;
    corpus::write_dataset(File::create(&out)?, ds)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Rule {
    /// AI iff any arXiv category is one of the AI categories.
    Arxiv,
    /// AI iff the top level-1 concept is one of the AI concepts.
    Concept,
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    pub corpus: PathBuf,
    #[arg(long, value_enum)]
    pub rule: Rule,
    #[arg(short, long, default_value = "dataset.csv")]
    pub output: PathBuf,
    /// Comma-separated AI categories or concepts replacing the defaults.
    #[arg(long, value_delimiter = ',')]
    pub ai: Vec<String>,
}

pub fn label(ctx: &Ctx, a: LabelArgs) -> Result<()> {
    let pubs = load_corpus(std::slice::from_ref(&a.corpus))?;
    let custom: BTreeSet<String> =
        a.ai.iter()
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
    let mut no_concepts = 0;
    let examples: Vec<Example> = match a.rule {
        Rule::Arxiv => {
            let cats = if custom.is_empty() {
                default_ai_categories()
            } else {
                custom
            };
            pubs.iter()
                .map(|p| Example {
                    publication_id: p.id.clone(),
                    label: assign_arxiv_label(p, &cats),
                    split: None,
                })
                .collect()
        }
        Rule::Concept => {
            let concepts = if custom.is_empty() {
                default_ai_concepts()
            } else {
                custom
            };
            pubs.iter()
                .map(|p| {
                    let l = assign_concept_label(p, &concepts);
                    no_concepts += usize::from(l.no_concepts);
                    Example {
                        publication_id: p.id.clone(),
                        label: l.label,
                        split: None,
                    }
                })
                .collect()
        }
    };
    let ai = examples.iter().filter(|e| e.label.value.is_ai()).count();
    let name = a
        .output
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let out = write_dataset_file(ctx, &a.output, &Dataset::new(name, examples))?;
    println!(
        "labeled {} publications ({ai} AI, {} Non-AI) -> {}",
        pubs.len(),
        pubs.len() - ai,
        out.display()
    );
    if no_concepts > 0 {
        println!("{no_concepts} publications had no sub-field concept and were labeled Non-AI");
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    pub corpus: PathBuf,
    #[arg(short)]
    pub n: usize,
    #[arg(short, long, default_value = "sample.jsonl")]
    pub output: PathBuf,
}

pub fn sample(ctx: &Ctx, a: SampleArgs) -> Result<()> {
    let pubs = load_corpus(std::slice::from_ref(&a.corpus))?;
    let picked = corpus::sample(&pubs, a.n, ctx.seed)?;
    let out = ctx.out(&a.output)?;
    corpus::write_corpus(std::io::BufWriter::new(File::create(&out)?), &picked)?;
    println!(
        "sampled {} of {} (seed {}) -> {}",
        picked.len(),
        pubs.len(),
        ctx.seed,
        out.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    pub dataset: PathBuf,
    #[arg(long)]
    pub train: Option<f64>,
    #[arg(long)]
    pub test: Option<f64>,
    #[arg(long)]
    pub validation: Option<f64>,
    /// Split each label class separately.
    #[arg(long)]
    pub stratified: bool,
    #[arg(short, long, default_value = "split.csv")]
    pub output: PathBuf,
}

pub fn split(ctx: &Ctx, a: SplitArgs) -> Result<()> {
    let base = ctx.config.split.unwrap_or_default();
    let ratios = SplitRatios::new(
        a.train.unwrap_or(base.train),
        a.test.unwrap_or(base.test),
        a.validation.unwrap_or(base.validation),
    )?;
    let mut ds = load_dataset(&a.dataset)?;
    let strategy = if a.stratified {
        SplitStrategy::Stratified
    } else {
        SplitStrategy::Uniform
    };
    for w in corpus::split_dataset(&mut ds, &ratios, ctx.seed, strategy)? {
        eprintln!("warning: {w}");
    }
    let count = |s| ds.in_split(s).count();
    let out = write_dataset_file(ctx, &a.output, &ds)?;
    println!(
        "split {} examples: train {}, test {}, validation {} -> {}",
        ds.examples.len(),
        count(corpus::SplitName::Train),
        count(corpus::SplitName::Test),
        count(corpus::SplitName::Validation),
        out.display()
    );
    Ok(())
}
