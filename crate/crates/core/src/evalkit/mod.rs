//! Measurement: confusion counts, metrics, sliced accuracy tables,
//! probability medians, the prompt matrix and report emission.
//!
//! AI is the positive class throughout.

mod emit;
mod matrix;
mod medians;
mod metrics;
mod slices;

pub use emit::{emit_report, Format, Report, RunReport, METRIC_DECIMALS, TABLE_DECIMALS};
pub use matrix::{cells_from_reports, prompt_matrix_report, PromptCell, PromptMatrix, PromptMatrixRow};
pub use medians::{median, median_probability_by_cell, CellMedians, CellSizes};
pub use metrics::{confusion, metrics, ConfusionCounts, MetricsReport, SliceDescriptor};
pub use slices::{
    category_accuracy, category_accuracy_with, venue_accuracy, CategoryAccuracy, CategoryRow, Judgement, VenueAccuracy,
    VenueList, VenueRow, DEFAULT_VENUES,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{0}: no records to evaluate")]
    EmptyInput(&'static str),
    #[error("unknown venue `{venue}`; configured venues: {known}")]
    UnknownVenue { venue: String, known: String },
    #[error("unknown prompt id `{0}`")]
    UnknownPrompt(String),
    #[error("unknown report format `{0}` (expected csv, json or markdown)")]
    UnknownFormat(String),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(&'static str),
    #[error("emit failed: {0}")]
    Emit(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
