use std::path::{Path, PathBuf};

use annobench::adapter::parse_metrics;
use annobench::evalkit::{
    cells_from_reports, emit_report, prompt_matrix_report, venue_accuracy, CategoryAccuracy, CellMedians, Format,
    MetricsReport, PromptCell, PromptMatrix, Report, RunReport, VenueAccuracy, VenueList,
};
use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand};
use serde::de::DeserializeOwned;

use crate::model::PredictionRow;
use crate::Ctx;

#[derive(Debug, Subcommand)]
pub enum ReportCommand {
    /// Fraction predicted AI per evaluation venue.
    Venue(VenueArgs),
    /// Model × prompt accuracy table with mean gain over the base prompts.
    Matrix(MatrixArgs),
    /// Combine metrics JSON files (baseline or external trainer) into one table.
    Metrics(MetricsArgs),
    /// Assemble one JSON document from a run's reports.
    Bundle(BundleArgs),
}

#[derive(Debug, Args)]
pub struct Output {
    #[arg(long, default_value = "csv")]
    pub format: String,
    /// Output file [default: stdout].
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VenueArgs {
    /// Predictions CSV from `eval --predictions`.
    #[arg(long)]
    pub predictions: PathBuf,
    /// Venue list, one per line [default: built-in list].
    #[arg(long)]
    pub venues: Option<PathBuf>,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args)]
pub struct MatrixArgs {
    /// Metrics JSON files with model and prompt slices, or CSV files with
    /// `model,prompt_id,accuracy` rows.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args)]
pub struct BundleArgs {
    /// Annotation run manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub metrics: Vec<PathBuf>,
    #[arg(long)]
    pub categories: Option<PathBuf>,
    #[arg(long)]
    pub venues: Option<PathBuf>,
    #[arg(long)]
    pub medians: Option<PathBuf>,
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

fn emit(ctx: &Ctx, report: Report<'_>, out: &Output) -> Result<()> {
    let bytes = emit_report(report, out.format.parse::<Format>()?)?;
    match &out.output {
        Some(p) => {
            ctx.write(p, &bytes)?;
        }
        None => print!("{}", String::from_utf8_lossy(&bytes)),
    }
    Ok(())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_slice(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn read_metrics(path: &Path) -> Result<Vec<MetricsReport>> {
    parse_metrics(&read(path)?).with_context(|| format!("reading metrics {}", path.display()))
}

pub fn report(ctx: &Ctx, cmd: ReportCommand) -> Result<()> {
    match cmd {
        ReportCommand::Venue(a) => {
            let venues = match a.venues.as_ref().or(ctx.config.venues.as_ref()) {
                Some(p) => VenueList::parse(&String::from_utf8(read(p)?)?),
                None => VenueList::builtin(),
            };
            let mut reader = csv::Reader::from_path(&a.predictions)
                .with_context(|| format!("opening {}", a.predictions.display()))?;
            let rows: Vec<PredictionRow> = reader.deserialize().collect::<Result<_, _>>()?;
            let with_venue: Vec<(&str, _)> = rows
                .iter()
                .filter_map(|r| r.venue.as_deref().filter(|v| !v.is_empty()).map(|v| (v, r.label)))
                .collect();
            if with_venue.len() < rows.len() {
                eprintln!(
                    "{} predictions had no venue and were skipped",
                    rows.len() - with_venue.len()
                );
            }
            let table: VenueAccuracy = venue_accuracy(&with_venue, &venues)?;
            emit(ctx, Report::Venues(&table), &a.out)
        }
        ReportCommand::Matrix(a) => {
            let mut cells: Vec<PromptCell> = Vec::new();
            for p in &a.inputs {
                if p.extension().is_some_and(|e| e == "csv") {
                    let mut r = csv::Reader::from_path(p).with_context(|| format!("opening {}", p.display()))?;
                    for row in r.deserialize() {
                        cells.push(row?);
                    }
                } else {
                    let reports = read_metrics(p)?;
                    let found = cells_from_reports(&reports);
                    if found.len() < reports.len() {
                        bail!("{}: every report needs slice.model and slice.prompt_id", p.display());
                    }
                    cells.extend(found);
                }
            }
            let matrix: PromptMatrix = prompt_matrix_report(&cells)?;
            emit(ctx, Report::PromptMatrix(&matrix), &a.out)
        }
        ReportCommand::Metrics(a) => {
            let mut all = Vec::new();
            for p in &a.inputs {
                all.extend(read_metrics(p)?);
            }
            emit(ctx, Report::Metrics(&all), &a.out)
        }
        ReportCommand::Bundle(a) => {
            let mut metrics = Vec::new();
            for p in &a.metrics {
                metrics.extend(read_metrics(p)?);
            }
            let bundle = RunReport {
                manifest: a.manifest.as_deref().map(read_json).transpose()?.unwrap_or_default(),
                metrics,
                categories: a.categories.as_deref().map(read_json::<CategoryAccuracy>).transpose()?,
                venues: a.venues.as_deref().map(read_json::<VenueAccuracy>).transpose()?,
                medians: a.medians.as_deref().map(read_json::<CellMedians>).transpose()?,
                prompt_matrix: a.matrix.as_deref().map(read_json::<PromptMatrix>).transpose()?,
            };
            let out = Output {
                format: "json".into(),
                output: a.output,
            };
            emit(ctx, Report::Bundle(&bundle), &out)
        }
    }
}
