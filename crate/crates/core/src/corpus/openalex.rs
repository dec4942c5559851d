use std::collections::BTreeMap;
use std::io::BufRead;
use std::time::Duration;

use serde::Deserialize;

use super::arxiv::normalize_ws;
use super::types::{Concept, Publication, Source};
use super::{CorpusError, LineError};

pub const DEFAULT_OPENALEX_URL: &str = "https://api.openalex.org";

/// The fields of an OpenAlex work we consume.
#[derive(Debug, Clone, Deserialize)]
pub struct Work {
    pub id: Option<String>,
    pub title: Option<String>,
    pub display_name: Option<String>,
    pub abstract_inverted_index: Option<BTreeMap<String, Vec<u32>>>,
    pub publication_year: Option<i32>,
    pub cited_by_count: Option<u64>,
    #[serde(default)]
    pub concepts: Vec<WorkConcept>,
    pub primary_location: Option<Location>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct WorkConcept {
    pub display_name: String,
    #[serde(default)]
    pub level: u32,
    #[serde(default)]
    pub score: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Location {
    pub source: Option<LocationSource>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct LocationSource {
    pub display_name: Option<String>,
}

/// Rebuilds abstract text from an OpenAlex inverted index.
///
/// Words are placed at their positions and joined with single spaces; gaps
/// in the position sequence collapse. Two words claiming one position is an
/// error.
pub fn invert_abstract(index: &BTreeMap<String, Vec<u32>>) -> Result<String, CorpusError> {
    let mut placed: BTreeMap<u32, &str> = BTreeMap::new();
    for (word, positions) in index {
        for &pos in positions {
            if let Some(prev) = placed.insert(pos, word.as_str()) {
                // BTreeMap iteration is ordered, so `prev` sorts first.
                return Err(CorpusError::DuplicatePosition {
                    position: pos,
                    first: prev.to_string(),
                    second: word.clone(),
                });
            }
        }
    }
    Ok(placed.into_values().collect::<Vec<_>>().join(" "))
}

/// The inverse of [`invert_abstract`] for single-spaced text.
pub fn build_index(text: &str) -> BTreeMap<String, Vec<u32>> {
    let mut index: BTreeMap<String, Vec<u32>> = BTreeMap::new();
    for (pos, word) in text.split(' ').filter(|w| !w.is_empty()).enumerate() {
        index.entry(word.to_string()).or_default().push(pos as u32);
    }
    index
}

/// Converts one work into a [`Publication`].
pub fn publication_from_work(work: Work) -> Result<Publication, String> {
    let id = work
        .id
        .as_deref()
        .map(|s| s.trim().trim_start_matches("https://openalex.org/").to_string())
        .filter(|s| !s.is_empty())
        .ok_or("missing id")?;
    let title = normalize_ws(work.title.as_deref().or(work.display_name.as_deref()).unwrap_or(""));
    if title.is_empty() {
        return Err(format!("work `{id}` has no title"));
    }
    let year = work
        .publication_year
        .ok_or_else(|| format!("work `{id}` has no publication_year"))?;
    let (abstract_text, missing) = match &work.abstract_inverted_index {
        Some(index) => (invert_abstract(index).map_err(|e| format!("work `{id}`: {e}"))?, false),
        None => (String::new(), true),
    };
    let mut p = Publication::new(id, Source::Openalex, title, abstract_text, year);
    p.abstract_missing = missing || p.abstract_text.is_empty();
    p.citation_count = work.cited_by_count;
    p.concepts = work
        .concepts
        .into_iter()
        .map(|c| Concept {
            name: c.display_name,
            level: c.level,
            score: c.score.clamp(0.0, 1.0),
        })
        .collect();
    p.venue = work
        .primary_location
        .and_then(|l| l.source)
        .and_then(|s| s.display_name);
    Ok(p)
}

/// Result of ingesting OpenAlex works.
#[derive(Debug, Default)]
pub struct OpenAlexIngest {
    pub publications: Vec<Publication>,
    /// Publications kept with an empty, flagged abstract.
    pub missing_abstract: usize,
    pub errors: Vec<LineError>,
}

impl OpenAlexIngest {
    fn push_work(&mut self, line: usize, work: Work) {
        match publication_from_work(work) {
            Ok(p) => {
                if p.abstract_missing {
                    self.missing_abstract += 1;
                }
                self.publications.push(p);
            }
            Err(reason) => self.errors.push(LineError { line, reason }),
        }
    }
}

/// Parses line-delimited OpenAlex work objects.
pub fn ingest_openalex<R: BufRead>(reader: R) -> OpenAlexIngest {
    let mut out = OpenAlexIngest::default();
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
        match serde_json::from_str::<Work>(&line) {
            Ok(work) => out.push_work(line_no, work),
            Err(e) => out.errors.push(LineError {
                line: line_no,
                reason: format!("invalid JSON: {e}"),
            }),
        }
    }
    out
}

#[derive(Debug, Deserialize)]
struct WorksPage {
    meta: PageMeta,
    results: Vec<Work>,
}

#[derive(Debug, Deserialize)]
struct PageMeta {
    next_cursor: Option<String>,
}

/// Cursor pager over the OpenAlex `/works` endpoint.
pub struct OpenAlexPager {
    base_url: String,
    mailto: Option<String>,
    filter: Option<String>,
    per_page: u32,
    agent: ureq::Agent,
}

impl OpenAlexPager {
    pub fn new(base_url: impl Into<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(60)))
            .build()
            .into();
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            mailto: None,
            filter: None,
            per_page: 200,
            agent,
        }
    }

    /// Polite-pool contact address.
    pub fn mailto(mut self, mailto: impl Into<String>) -> Self {
        self.mailto = Some(mailto.into());
        self
    }

    pub fn filter(mut self, filter: impl Into<String>) -> Self {
        self.filter = Some(filter.into());
        self
    }

    pub fn per_page(mut self, per_page: u32) -> Self {
        self.per_page = per_page.clamp(1, 200);
        self
    }

    /// Fetches one page. Returns the works and the cursor for the next page.
    pub fn fetch_page(&self, cursor: &str) -> Result<(Vec<Work>, Option<String>), CorpusError> {
        let page_err = |reason: String| CorpusError::Page {
            cursor: cursor.to_string(),
            reason,
        };
        let mut req = self
            .agent
            .get(format!("{}/works", self.base_url))
            .query("per-page", self.per_page.to_string())
            .query("cursor", cursor);
        if let Some(f) = &self.filter {
            req = req.query("filter", f);
        }
        if let Some(m) = &self.mailto {
            req = req.query("mailto", m);
        }
        let mut resp = req.call().map_err(|e| page_err(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(|e| page_err(e.to_string()))?;
        if status != 200 {
            return Err(page_err(format!("HTTP {status}")));
        }
        let page: WorksPage = serde_json::from_str(&body).map_err(|e| page_err(format!("invalid page: {e}")))?;
        let next = page.meta.next_cursor.filter(|c| !c.is_empty());
        Ok((page.results, next))
    }

    /// Walks pages from `start_cursor` (use `"*"` for a fresh walk) until the
    /// cursor runs out or `max_pages` pages have been read.
    ///
    /// On failure the error carries the cursor of the failing page, so a
    /// caller can resume from it.
    pub fn fetch_all(&self, start_cursor: &str, max_pages: Option<usize>) -> Result<OpenAlexIngest, CorpusError> {
        let mut out = OpenAlexIngest::default();
        let mut cursor = start_cursor.to_string();
        let mut pages = 0usize;
        let mut record_no = 0usize;
        loop {
            if max_pages.is_some_and(|m| pages >= m) {
                break;
            }
            let (works, next) = self.fetch_page(&cursor)?;
            pages += 1;
            let empty = works.is_empty();
            for work in works {
                record_no += 1;
                out.push_work(record_no, work);
            }
            match next {
                Some(n) if !empty => cursor = n,
                _ => break,
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx(pairs: &[(&str, &[u32])]) -> BTreeMap<String, Vec<u32>> {
        pairs.iter().map(|(w, p)| (w.to_string(), p.to_vec())).collect()
    }

    #[test]
    fn inversion_examples() {
        assert_eq!(
            invert_abstract(&idx(&[("deep", &[0]), ("learning", &[1])])).unwrap(),
            "deep learning"
        );
        assert_eq!(invert_abstract(&BTreeMap::new()).unwrap(), "");
        assert_eq!(invert_abstract(&idx(&[("a", &[0, 2]), ("b", &[1])])).unwrap(), "a b a");
    }

    #[test]
    fn gaps_collapse() {
        assert_eq!(invert_abstract(&idx(&[("x", &[0]), ("y", &[5])])).unwrap(), "x y");
    }

    #[test]
    fn duplicate_position_names_it() {
        let err = invert_abstract(&idx(&[("a", &[0, 3]), ("b", &[3])])).unwrap_err();
        match err {
            CorpusError::DuplicatePosition { position, .. } => assert_eq!(position, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(err_string(&idx(&[("a", &[7]), ("b", &[7])])).contains("position 7"));
    }

    fn err_string(i: &BTreeMap<String, Vec<u32>>) -> String {
        invert_abstract(i).unwrap_err().to_string()
    }

    #[test]
    fn work_mapping() {
        let line = r#"{"id":"https://openalex.org/W1","title":"T","publication_year":2015,"cited_by_count":3,"abstract_inverted_index":{"hi":[0]},"concepts":[{"display_name":"Machine learning","level":1,"score":0.8}]}"#;
        let out = ingest_openalex(line.as_bytes());
        let p = &out.publications[0];
        assert_eq!(p.id, "W1");
        assert_eq!(p.citation_count, Some(3));
        assert_eq!(p.year, 2015);
        assert_eq!(p.abstract_text, "hi");
        assert_eq!(p.concepts[0].level, 1);
    }

    #[test]
    fn absent_abstract_is_flagged() {
        let line = r#"{"id":"W2","title":"T","publication_year":2015,"cited_by_count":1}"#;
        let out = ingest_openalex(line.as_bytes());
        assert_eq!(out.missing_abstract, 1);
        assert!(out.publications[0].abstract_missing);
        assert!(out.publications[0].abstract_text.is_empty());
        out.publications[0].validate().unwrap();
    }
}
