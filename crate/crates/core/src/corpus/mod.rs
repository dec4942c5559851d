//! Corpus construction: ingestion, labeling rules, filtering, sampling and
//! splitting.

mod arxiv;
mod io;
mod labeling;
mod openalex;
mod select;
mod types;

pub use arxiv::{ingest_arxiv, year_from_date, ArxivIngest};
pub use io::{read_corpus, read_dataset, write_corpus, write_dataset, DatasetRow};
pub use labeling::{
    assign_arxiv_label, assign_concept_label, default_ai_categories, default_ai_concepts, ConceptLabeling,
    AI_CATEGORIES, AI_CONCEPTS,
};
pub use openalex::{
    build_index, ingest_openalex, invert_abstract, publication_from_work, OpenAlexIngest, OpenAlexPager, Work,
    DEFAULT_OPENALEX_URL,
};
pub use select::{
    dedup, filter_corpus, sample, split, split_dataset, split_sizes, Dedup, FilterConfig, FilterOutcome, SplitSet,
    SplitStrategy,
};
pub use types::{
    Concept, Dataset, Example, Label, LabelValue, Provenance, Publication, Source, SplitName, SplitRatios,
};

use thiserror::Error;

/// Errors raised by corpus operations.
#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid publication `{id}`: {reason}")]
    InvalidPublication { id: String, reason: String },
    #[error("invalid label: {0}")]
    InvalidLabel(String),
    #[error("invalid split ratios: {0}")]
    InvalidRatios(String),
    #[error("duplicate publication id `{0}`")]
    DuplicateId(String),
    #[error("position {position} claimed by both `{first}` and `{second}`")]
    DuplicatePosition {
        position: u32,
        first: String,
        second: String,
    },
    #[error("cannot sample {requested} publications from {available}")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("cannot split an empty dataset")]
    EmptyDataset,
    #[error("OpenAlex request failed at cursor `{cursor}`: {reason}")]
    Page { cursor: String, reason: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// A line that could not be ingested. Ingestion never aborts on these.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    /// 1-based line number in the input stream.
    pub line: usize,
    pub reason: String,
}
