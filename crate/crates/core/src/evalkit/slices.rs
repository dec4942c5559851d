use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::corpus::{LabelValue, Publication, AI_CATEGORIES};

/// The evaluation venue list shipped with the crate.
pub const DEFAULT_VENUES: &str = include_str!("../../data/venues.txt");

/// One bucket of a category table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRow {
    pub category: String,
    pub n: u64,
    /// Absent for an empty bucket.
    pub accuracy: Option<f64>,
}

impl CategoryRow {
    fn from_hits(category: impl Into<String>, n: u64, hits: u64) -> Self {
        Self {
            category: category.into(),
            n,
            accuracy: (n > 0).then(|| hits as f64 / n as f64),
        }
    }
}

/// Labeling accuracy per arXiv category.
///
/// A publication counts toward every AI category it carries, primary or
/// cross-post. Publications carrying none of them land in the `None`
/// bucket. `overall` counts each publication once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryAccuracy {
    pub rows: Vec<CategoryRow>,
    pub none: CategoryRow,
    pub overall: CategoryRow,
}

/// One judged publication.
#[derive(Debug, Clone, Copy)]
pub struct Judgement<'a> {
    pub publication: &'a Publication,
    pub predicted: LabelValue,
    pub gold: LabelValue,
}

/// Per-category accuracy over the default AI categories.
pub fn category_accuracy(records: &[Judgement<'_>]) -> CategoryAccuracy {
    category_accuracy_with(records, &AI_CATEGORIES)
}

/// Per-category accuracy over `categories`, in the given order.
///
/// Repeated publication ids are counted once (first occurrence wins).
pub fn category_accuracy_with(records: &[Judgement<'_>], categories: &[&str]) -> CategoryAccuracy {
    let mut per_cat = vec![(0u64, 0u64); categories.len()];
    let (mut none_n, mut none_hits) = (0u64, 0u64);
    let (mut all_n, mut all_hits) = (0u64, 0u64);
    let mut seen = HashSet::new();
    for r in records {
        if !seen.insert(r.publication.id.as_str()) {
            continue;
        }
        let hit = u64::from(r.predicted == r.gold);
        all_n += 1;
        all_hits += hit;
        let mut any = false;
        for (i, cat) in categories.iter().enumerate() {
            if r.publication.categories.iter().any(|c| c == cat) {
                any = true;
                per_cat[i].0 += 1;
                per_cat[i].1 += hit;
            }
        }
        if !any {
            none_n += 1;
            none_hits += hit;
        }
    }
    CategoryAccuracy {
        rows: categories
            .iter()
            .zip(per_cat)
            .map(|(c, (n, hits))| CategoryRow::from_hits(*c, n, hits))
            .collect(),
        none: CategoryRow::from_hits("None", none_n, none_hits),
        overall: CategoryRow::from_hits("Overall", all_n, all_hits),
    }
}

/// Ordered list of evaluation venues.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VenueList {
    venues: Vec<String>,
}

impl VenueList {
    pub fn builtin() -> Self {
        Self::parse(DEFAULT_VENUES)
    }

    /// One venue per line; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Self {
        Self {
            venues: text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_string)
                .collect(),
        }
    }

    pub fn names(&self) -> &[String] {
        &self.venues
    }

    /// Case-insensitive lookup of the configured spelling.
    pub fn resolve(&self, venue: &str) -> Option<&str> {
        let venue = venue.trim();
        self.venues
            .iter()
            .find(|v| v.eq_ignore_ascii_case(venue))
            .map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VenueRow {
    pub venue: String,
    pub num_papers: u64,
    pub accuracy: f64,
}

/// Fraction of venue papers predicted AI, per venue and over their union.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VenueAccuracy {
    /// Venues with at least one paper, in configured order.
    pub rows: Vec<VenueRow>,
    pub total_papers: u64,
    pub overall: f64,
}

/// Every venue paper has gold label AI, so accuracy is the share predicted
/// AI.
pub fn venue_accuracy(records: &[(&str, LabelValue)], venues: &VenueList) -> Result<VenueAccuracy, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyInput("venue_accuracy"));
    }
    let mut tallies = vec![(0u64, 0u64); venues.names().len()];
    for (venue, predicted) in records {
        let canonical = venues.resolve(venue).ok_or_else(|| EvalError::UnknownVenue {
            venue: venue.to_string(),
            known: venues.names().join(", "),
        })?;
        let i = venues
            .names()
            .iter()
            .position(|v| v == canonical)
            .expect("resolved venue is listed");
        tallies[i].0 += 1;
        tallies[i].1 += u64::from(predicted.is_ai());
    }
    let rows: Vec<VenueRow> = venues
        .names()
        .iter()
        .zip(&tallies)
        .filter(|(_, (n, _))| *n > 0)
        .map(|(v, &(n, hits))| VenueRow {
            venue: v.clone(),
            num_papers: n,
            accuracy: hits as f64 / n as f64,
        })
        .collect();
    let total: u64 = tallies.iter().map(|t| t.0).sum();
    let hits: u64 = tallies.iter().map(|t| t.1).sum();
    Ok(VenueAccuracy {
        rows,
        total_papers: total,
        overall: hits as f64 / total as f64,
    })
}
