use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{AnnotateError, AnnotationRecord, BatchOutcome, ChatParams};
use crate::corpus::Publication;
use crate::hashing::sha256_hex;

/// Everything needed to identify and audit one annotation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub prompt_id: String,
    pub prompt_checksum: String,
    pub model: String,
    pub params: ChatParams,
    pub backend: String,
    pub corpus_hash: String,
    pub counts: super::BatchStats,
    /// Cost of all records in the run, cached or not.
    pub total_cost: f64,
    /// Cost of backend calls made by this run.
    pub incurred_cost: f64,
    #[serde(default)]
    pub config: serde_json::Value,
}

impl RunManifest {
    pub fn new(
        prompt_checksum: &str,
        params: &ChatParams,
        backend: &str,
        pubs: &[Publication],
        outcome: &BatchOutcome,
    ) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            prompt_id: outcome.records.first().map(|r| r.prompt_id.clone()).unwrap_or_default(),
            prompt_checksum: prompt_checksum.to_string(),
            model: params.model.clone(),
            params: params.clone(),
            backend: backend.to_string(),
            corpus_hash: corpus_hash(pubs),
            counts: outcome.stats,
            total_cost: outcome.records.iter().map(|r| r.cost_units).sum(),
            incurred_cost: outcome.incurred_cost,
            config: serde_json::Value::Null,
        }
    }
}

/// SHA-256 over the publications' JSON lines, in order.
pub fn corpus_hash(pubs: &[Publication]) -> String {
    let mut bytes = Vec::new();
    for p in pubs {
        serde_json::to_writer(&mut bytes, p).expect("publication serializes");
        bytes.push(b'\n');
    }
    sha256_hex(&bytes)
}

pub fn write_records<W: Write>(mut w: W, records: &[AnnotationRecord]) -> Result<(), AnnotateError> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_records<R: BufRead>(reader: R) -> Result<Vec<AnnotationRecord>, AnnotateError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: AnnotationRecord =
            serde_json::from_str(&line).map_err(|e| AnnotateError::Records(format!("line {}: {e}", i + 1)))?;
        if record.parsed.is_some() == record.parse_error.is_some() {
            return Err(AnnotateError::Records(format!(
                "line {}: exactly one of parsed and parse_error must be set",
                i + 1
            )));
        }
        if let Some(p) = record.parsed {
            if !(0.0..=1.0).contains(&p.probability) {
                return Err(AnnotateError::Records(format!(
                    "line {}: probability {} outside [0, 1]",
                    i + 1,
                    p.probability
                )));
            }
        }
        out.push(record);
    }
    Ok(out)
}
