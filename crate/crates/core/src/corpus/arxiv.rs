use std::io::BufRead;

use serde::Deserialize;

use super::types::{Publication, Source};
use super::LineError;

/// The subset of the public arXiv metadata snapshot we read.
#[derive(Debug, Deserialize)]
struct SnapshotRecord {
    id: Option<serde_json::Value>,
    title: Option<String>,
    #[serde(rename = "abstract")]
    abstract_text: Option<String>,
    categories: Option<String>,
    #[serde(default)]
    versions: Vec<SnapshotVersion>,
    update_date: Option<String>,
    date: Option<String>,
}

#[derive(Debug, Deserialize)]
struct SnapshotVersion {
    created: Option<String>,
}

/// Result of ingesting an arXiv snapshot stream.
#[derive(Debug, Default)]
pub struct ArxivIngest {
    pub publications: Vec<Publication>,
    /// Well-formed records dropped for lacking a title or categories.
    pub skipped: usize,
    pub errors: Vec<LineError>,
}

/// Parses line-delimited arXiv snapshot records.
///
/// Blank lines are ignored. Lines that are not JSON objects, lack an id, or
/// carry no parsable date produce a [`LineError`]; the stream continues.
pub fn ingest_arxiv<R: BufRead>(reader: R) -> ArxivIngest {
    let mut out = ArxivIngest::default();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                out.errors.push(LineError {
                    line: line_no,
                    reason: format!("read error: {e}"),
                });
                continue;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(&line) {
            Ok(Some(p)) => out.publications.push(p),
            Ok(None) => out.skipped += 1,
            Err(reason) => out.errors.push(LineError { line: line_no, reason }),
        }
    }
    out
}

fn parse_line(line: &str) -> Result<Option<Publication>, String> {
    let rec: SnapshotRecord = serde_json::from_str(line).map_err(|e| format!("invalid JSON: {e}"))?;
    let id = match rec.id {
        Some(serde_json::Value::String(s)) if !s.trim().is_empty() => s.trim().to_string(),
        // Old-style numeric ids sometimes lose their quotes in re-exports.
        Some(serde_json::Value::Number(n)) => n.to_string(),
        _ => return Err("missing id".to_string()),
    };
    let title = normalize_ws(rec.title.as_deref().unwrap_or(""));
    let categories: Vec<String> = rec
        .categories
        .as_deref()
        .unwrap_or("")
        .split_whitespace()
        .map(str::to_string)
        .collect();
    if title.is_empty() || categories.is_empty() {
        return Ok(None);
    }

    let earliest_version = rec
        .versions
        .iter()
        .filter_map(|v| v.created.as_deref().and_then(year_from_date))
        .min();
    let year = earliest_version
        .or_else(|| rec.update_date.as_deref().and_then(year_from_date))
        .or_else(|| rec.date.as_deref().and_then(year_from_date))
        .ok_or_else(|| format!("record `{id}` has no parsable date"))?;

    let abstract_text = normalize_ws(rec.abstract_text.as_deref().unwrap_or(""));
    let mut p = Publication::new(id, Source::Arxiv, title, abstract_text, year);
    p.abstract_missing = p.abstract_text.is_empty();
    p.categories = categories;
    Ok(Some(p))
}

/// Extracts a calendar year from either an ISO date (`2019-06-01`) or the
/// RFC 2822 stamps used in snapshot version entries
/// (`Mon, 2 Apr 2007 19:18:42 GMT`): the first standalone four-digit run in
/// 1900..=2999.
pub fn year_from_date(s: &str) -> Option<i32> {
    s.split(|c: char| !c.is_ascii_digit())
        .filter(|run| run.len() == 4)
        .filter_map(|run| run.parse::<i32>().ok())
        .find(|y| (1900..3000).contains(y))
}

pub(crate) fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
