use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use annobench::annotator::{
    self, annotate_batch, AnnotateOptions, AnnotationCache, Backend, ChatParams, HttpBackend, MockBackend, MockScript,
    ReplayBackend, RetryPolicy, RunManifest, DEFAULT_BASE_URL,
};
use annobench::promptkit::{prompt_matrix, PromptSet, PromptSpec};
use anyhow::{bail, Context, Result};
use clap::Args;
use serde_json::json;

use crate::{Ctx, ExitError, EXIT_TRANSPORT};

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    /// Corpus JSONL (repeatable); defaults to the config's corpus.
    #[arg(long)]
    pub corpus: Vec<PathBuf>,
    /// Prompt id such as `expert+UC`, or `all` for the full matrix.
    #[arg(long, default_value = "expert+UC")]
    pub prompt: String,
    /// Chat model [default: gpt-3.5-turbo].
    #[arg(long)]
    pub model: Option<String>,
    /// `live`, `replay:<fixture.jsonl>` or `mock:<script.json>`.
    #[arg(long)]
    pub backend: Option<String>,
    /// Chat-completions base URL for the live backend.
    #[arg(long)]
    pub base_url: Option<String>,
    /// Prompt file replacing the built-in one.
    #[arg(long)]
    pub prompt_file: Option<PathBuf>,
    /// Response cache [default: <output-dir>/cache].
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Records JSONL (single prompt only). Defaults to
    /// `annotations/<model>/<prompt>.jsonl`.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Print the cost estimate and exit without calling the backend.
    #[arg(long)]
    pub dry_run: bool,
    /// Requests in flight [default: 4].
    #[arg(long)]
    pub concurrency: Option<usize>,
    /// Request budget per minute.
    #[arg(long)]
    pub rpm: Option<u32>,
    #[arg(long, default_value_t = RetryPolicy::default().max_retries)]
    pub max_retries: u32,
    /// Ask once more when a reply does not parse.
    #[arg(long)]
    pub reask_malformed: bool,
}

fn specs(arg: &str) -> Result<Vec<PromptSpec>> {
    if arg.eq_ignore_ascii_case("all") {
        return Ok(prompt_matrix());
    }
    arg.split(',')
        .map(|s| s.parse::<PromptSpec>().map_err(anyhow::Error::from))
        .collect()
}

fn build_backend(selector: &str, base_url: &str) -> Result<Box<dyn Backend>> {
    let (kind, path) = match selector.split_once(':') {
        Some((k, p)) => (k, Some(p)),
        None => (selector, None),
    };
    Ok(match (kind, path) {
        ("live", None) => Box::new(HttpBackend::from_env(base_url)?),
        ("replay", Some(p)) => {
            let f = File::open(p).with_context(|| format!("opening replay fixture {p}"))?;
            let name = Path::new(p)
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            Box::new(ReplayBackend::from_reader(name, std::io::BufReader::new(f))?)
        }
        ("mock", Some(p)) => {
            let script: MockScript = serde_json::from_slice(&std::fs::read(p).with_context(|| format!("reading {p}"))?)
                .with_context(|| format!("parsing mock script {p}"))?;
            Box::new(MockBackend::new(script))
        }
        _ => bail!("unknown backend `{selector}`; expected live, replay:<fixture.jsonl> or mock:<script.json>"),
    })
}

pub fn annotate(ctx: &Ctx, a: AnnotateArgs) -> Result<()> {
    let cfg = &ctx.config;
    let pubs = crate::data::load_corpus(&ctx.corpus_paths(&a.corpus))?;
    let specs = specs(&a.prompt)?;
    if a.output.is_some() && specs.len() > 1 {
        bail!("--output needs a single prompt; drop it to write one file per prompt");
    }
    let prompts = match a.prompt_file.as_ref().or(cfg.prompt_file.as_ref()) {
        Some(p) => PromptSet::load(p)?,
        None => PromptSet::builtin(),
    };
    let model = a
        .model
        .clone()
        .or_else(|| cfg.model.clone())
        .unwrap_or_else(|| ChatParams::default().model);
    let params = cfg.params.apply(ChatParams::for_model(&model));
    params.validate()?;
    let cost_model = cfg.cost.clone().unwrap_or_default();

    if a.dry_run {
        let mut rows = Vec::new();
        for spec in &specs {
            let cost = annotator::estimate_cost(&pubs, &prompts, *spec, &params, &cost_model)?;
            rows.push(json!({
                "prompt_id": spec.id(),
                "model": model,
                "publications": pubs.len(),
                "estimated_cost": cost,
            }));
        }
        println!("{}", serde_json::to_string_pretty(&rows)?);
        return Ok(());
    }

    let selector = a
        .backend
        .clone()
        .or_else(|| cfg.backend.clone())
        .unwrap_or_else(|| "live".into());
    let base_url = a
        .base_url
        .clone()
        .or_else(|| cfg.base_url.clone())
        .unwrap_or_else(|| DEFAULT_BASE_URL.into());
    let backend = build_backend(&selector, &base_url)?;
    let cache_dir = a
        .cache_dir
        .clone()
        .or_else(|| cfg.cache_dir.clone())
        .unwrap_or_else(|| ctx.output_dir.join("cache"));
    let opts = AnnotateOptions {
        concurrency: a.concurrency.or(cfg.concurrency).unwrap_or(4),
        retry: RetryPolicy {
            max_retries: a.max_retries,
            ..Default::default()
        },
        requests_per_minute: a.rpm.or(cfg.requests_per_minute),
        reask_malformed: a.reask_malformed,
        cache: Some(AnnotationCache::open(&cache_dir)?),
        cost_model,
        sleeper: Arc::new(std::thread::sleep),
        ..Default::default()
    };

    let mut transport_failures = 0;
    for spec in specs {
        let outcome = match annotate_batch(&pubs, &prompts, spec, &params, backend.as_ref(), &opts) {
            Ok(o) => o,
            Err(annotator::AnnotateError::Auth(msg)) => {
                return Err(ExitError {
                    code: EXIT_TRANSPORT,
                    message: format!("annotation aborted: {msg}; completed records are cached, re-run to resume"),
                }
                .into())
            }
            Err(e) => return Err(e.into()),
        };
        let records_path = match &a.output {
            Some(p) => p.clone(),
            None => PathBuf::from("annotations")
                .join(&model)
                .join(format!("{}.jsonl", spec.id())),
        };
        let records_path = ctx.out(&records_path)?;
        annotator::write_records(std::io::BufWriter::new(File::create(&records_path)?), &outcome.records)?;

        let mut manifest = RunManifest::new(prompts.checksum(), &params, &backend.describe(), &pubs, &outcome);
        manifest.prompt_id = spec.id();
        manifest.config = serde_json::to_value(cfg)?;
        let manifest_path = records_path.with_extension("manifest.json");
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        std::fs::write(&manifest_path, bytes)?;

        let s = outcome.stats;
        println!(
            "{} {}: {} records ({} cached, {} backend calls, {} parsed, {} malformed, {} transport errors) -> {}",
            model,
            spec.id(),
            s.total,
            s.cached,
            s.backend_calls,
            s.parsed,
            s.malformed,
            s.transport_errors,
            records_path.display()
        );
        transport_failures += s.transport_errors;
    }
    if transport_failures > 0 {
        return Err(ExitError {
            code: EXIT_TRANSPORT,
            message: format!("{transport_failures} publications could not be annotated; re-run to retry them"),
        }
        .into());
    }
    Ok(())
}
