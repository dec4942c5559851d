//! Chatbot-as-expert-annotator pipeline for scholarly publications.
//!
//! The crate is organised as the pipeline runs:
//!
//! * [`corpus`] ingests arXiv snapshots and OpenAlex works, applies the
//!   category and concept labeling rules, filters, samples and splits.
//! * [`promptkit`] materialises the 3×3 persona × clause zero-shot prompt
//!   matrix and builds per-publication user messages.
//! * [`annotator`] drives a chat-completion endpoint (or a replay/mock
//!   backend), parses `(label, probability)` responses, caches records on
//!   disk and accounts cost.
//! * [`classifier`] is a hashed n-gram logistic regression baseline trained
//!   on gold or chatbot labels.
//! * [`evalkit`] holds every measurement: confusion counts, metrics,
//!   per-category and per-venue accuracy, probability medians, the prompt
//!   matrix table and deterministic report emission.
//! * [`adapter`] is the file contract with an external transformer trainer.

pub mod adapter;
pub mod annotator;
pub mod classifier;
pub mod corpus;
pub mod evalkit;
pub mod promptkit;

mod hashing;

pub use corpus::{Label, LabelValue, Provenance, Publication, Source};
