mod annotate;
mod config;
mod data;
mod model;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use config::{RunConfig, DEFAULT_SEED};

/// Exit status for runs that finished but could not reach the backend for
/// some or all publications.
pub const EXIT_TRANSPORT: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "annobench",
    version,
    about = "Chatbot annotation and classifier evaluation pipeline"
)]
struct Cli {
    /// TOML run configuration; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for sampling, splitting and training [default: 42].
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory that relative output paths are written under.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert an arXiv snapshot or OpenAlex works into a corpus file.
    Ingest(data::IngestArgs),
    /// Assign rule-based gold labels to a corpus.
    Label(data::LabelArgs),
    /// Draw a seeded random sample from a corpus.
    Sample(data::SampleArgs),
    /// Assign train/test/validation splits to a dataset.
    Split(data::SplitArgs),
    /// Annotate a corpus with a chatbot prompt.
    Annotate(annotate::AnnotateArgs),
    /// Train the baseline classifier (or hand off to an external trainer).
    Train(model::TrainArgs),
    /// Evaluate a trained model or a set of annotations.
    Eval(model::EvalArgs),
    /// Build report tables.
    #[command(subcommand)]
    Report(report::ReportCommand),
}

/// Settings shared by every subcommand.
pub struct Ctx {
    pub config: RunConfig,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Ctx {
    /// Resolves an output path under the output directory and creates its
    /// parent.
    pub fn out(&self, path: &Path) -> Result<PathBuf> {
        let p = self.output_dir.join(path);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        Ok(p)
    }

    pub fn write(&self, path: &Path, bytes: &[u8]) -> Result<PathBuf> {
        let p = self.out(path)?;
        std::fs::write(&p, bytes).with_context(|| format!("writing {}", p.display()))?;
        Ok(p)
    }

    /// Corpus files from the flag, else from the config.
    pub fn corpus_paths(&self, flag: &[PathBuf]) -> Vec<PathBuf> {
        if flag.is_empty() {
            self.config.corpus.clone()
        } else {
            flag.to_vec()
        }
    }
}

/// An error carrying a specific exit status.
#[derive(Debug)]
pub struct ExitError {
    pub code: u8,
    pub message: String,
}

impl std::fmt::Display for ExitError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for ExitError {}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let ctx = Ctx {
        seed: cli.seed.or(config.seed).unwrap_or(DEFAULT_SEED),
        output_dir: cli
            .output_dir
            .clone()
            .or_else(|| config.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from(".")),
        config,
    };
    match cli.command {
        Command::Ingest(a) => data::ingest(&ctx, a),
        Command::Label(a) => data::label(&ctx, a),
        Command::Sample(a) => data::sample(&ctx, a),
        Command::Split(a) => data::split(&ctx, a),
        Command::Annotate(a) => annotate::annotate(&ctx, a),
        Command::Train(a) => model::train(&ctx, a),
        Command::Eval(a) => model::eval(&ctx, a),
        Command::Report(r) => report::report(&ctx, r),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<ExitError>() {
                Some(x) => ExitCode::from(x.code),
                None => ExitCode::FAILURE,
            }
        }
    }
}
