use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use super::types::{Dataset, Example, Label, LabelValue, Provenance, Publication, SplitName};
use super::CorpusError;

/// Writes the canonical corpus file: one JSON publication per line.
pub fn write_corpus<W: Write>(mut writer: W, pubs: &[Publication]) -> Result<(), CorpusError> {
    for p in pubs {
        serde_json::to_writer(&mut writer, p)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a canonical corpus file. Rejects records that break invariants and
/// repeated ids.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<Publication>, CorpusError> {
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let p: Publication =
            serde_json::from_str(&line).map_err(|e| CorpusError::Parse(format!("corpus line {}: {e}", i + 1)))?;
        p.validate()?;
        if !seen.insert(p.id.clone()) {
            return Err(CorpusError::DuplicateId(p.id));
        }
        out.push(p);
    }
    Ok(out)
}

/// One row of a dataset CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub publication_id: String,
    pub label: LabelValue,
    pub provenance: Provenance,
    pub confidence: Option<f64>,
    pub split: Option<SplitName>,
}

impl From<&Example> for DatasetRow {
    fn from(e: &Example) -> Self {
        Self {
            publication_id: e.publication_id.clone(),
            label: e.label.value,
            provenance: e.label.provenance,
            confidence: e.label.confidence,
            split: e.split,
        }
    }
}

pub fn write_dataset<W: Write>(writer: W, dataset: &Dataset) -> Result<(), CorpusError> {
    let mut w = csv::Writer::from_writer(writer);
    for e in &dataset.examples {
        w.serialize(DatasetRow::from(e))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset<R: Read>(reader: R, name: &str) -> Result<Dataset, CorpusError> {
    let mut r = csv::Reader::from_reader(reader);
    let mut examples = Vec::new();
    for row in r.deserialize::<DatasetRow>() {
        let row = row?;
        examples.push(Example {
            label: Label::new(row.label, row.provenance, row.confidence)?,
            publication_id: row.publication_id,
            split: row.split,
        });
    }
    let ds = Dataset::new(name, examples);
    ds.validate()?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::types::Source;

    #[test]
    fn dataset_csv_header_and_roundtrip() {
        let ds = Dataset::new(
            "d",
            vec![
                Example {
                    publication_id: "a".into(),
                    label: Label::rule(LabelValue::Ai, Provenance::ArxivRule),
                    split: Some(SplitName::Train),
                },
                Example {
                    publication_id: "b".into(),
                    label: Label::new(LabelValue::NonAi, Provenance::Chatbot, Some(0.2)).unwrap(),
                    split: None,
                },
            ],
        );
        let mut buf = Vec::new();
        write_dataset(&mut buf, &ds).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("publication_id,label,provenance,confidence,split\n"));
        assert!(text.contains("a,AI,arxiv_rule,,train\n"));
        assert!(text.contains("b,Non-AI,chatbot,0.2,\n"));
        assert_eq!(read_dataset(buf.as_slice(), "d").unwrap(), ds);
    }

    #[test]
    fn corpus_rejects_duplicate_ids() {
        let p = Publication::new("a", Source::Arxiv, "T", "A", 2020);
        let mut buf = Vec::new();
        write_corpus(&mut buf, &[p.clone(), p]).unwrap();
        assert!(matches!(read_corpus(buf.as_slice()), Err(CorpusError::DuplicateId(_))));
    }
}
