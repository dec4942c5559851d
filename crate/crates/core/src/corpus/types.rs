use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CorpusError;

/// Where a publication record came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Arxiv,
    Openalex,
    Conference,
}

/// An OpenAlex concept attached to a work.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Concept {
    pub name: String,
    pub level: u32,
    pub score: f64,
}

/// One scholarly record.
///
/// `categories` keeps arXiv order: the first entry is the primary category,
/// the rest are cross-posts. Field order here is the on-disk field order of
/// the canonical corpus file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Publication {
    pub id: String,
    pub source: Source,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    /// Set when the source carried no abstract at all.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub abstract_missing: bool,
    pub year: i32,
    #[serde(default)]
    pub categories: Vec<String>,
    #[serde(default)]
    pub concepts: Vec<Concept>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub venue: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub citation_count: Option<u64>,
}

impl Publication {
    /// Minimal constructor used by tests and fixtures.
    pub fn new(
        id: impl Into<String>,
        source: Source,
        title: impl Into<String>,
        abstract_text: impl Into<String>,
        year: i32,
    ) -> Self {
        Self {
            id: id.into(),
            source,
            title: title.into(),
            abstract_text: abstract_text.into(),
            abstract_missing: false,
            year,
            categories: Vec::new(),
            concepts: Vec::new(),
            venue: None,
            citation_count: None,
        }
    }

    pub fn with_categories<I, S>(mut self, categories: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.categories = categories.into_iter().map(Into::into).collect();
        self
    }

    /// Checks the record-level invariants.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let fail = |reason: &str| {
            Err(CorpusError::InvalidPublication {
                id: self.id.clone(),
                reason: reason.to_string(),
            })
        };
        if self.id.trim().is_empty() {
            return fail("empty id");
        }
        if self.title.trim().is_empty() {
            return fail("empty title");
        }
        if self.abstract_text.is_empty() && !self.abstract_missing {
            return fail("empty abstract without the abstract_missing flag");
        }
        if self.year < 1900 {
            return fail("year before 1900");
        }
        if let Some(c) = self.concepts.iter().find(|c| !(0.0..=1.0).contains(&c.score)) {
            return Err(CorpusError::InvalidPublication {
                id: self.id.clone(),
                reason: format!("concept `{}` score {} outside [0,1]", c.name, c.score),
            });
        }
        Ok(())
    }
}

/// Binary class. `Ai` is the positive class everywhere in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LabelValue {
    #[serde(rename = "AI")]
    Ai,
    #[serde(rename = "Non-AI")]
    NonAi,
}

impl LabelValue {
    pub fn is_ai(self) -> bool {
        self == LabelValue::Ai
    }

    pub fn from_is_ai(is_ai: bool) -> Self {
        if is_ai {
            LabelValue::Ai
        } else {
            LabelValue::NonAi
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LabelValue::Ai => "AI",
            LabelValue::NonAi => "Non-AI",
        }
    }
}

impl fmt::Display for LabelValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LabelValue {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ai" | "1" | "true" => Ok(LabelValue::Ai),
            "non-ai" | "nonai" | "non_ai" | "0" | "false" => Ok(LabelValue::NonAi),
            _ => Err(CorpusError::Parse(format!("unknown label `{s}`"))),
        }
    }
}

/// Who assigned a label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ArxivRule,
    ConceptRule,
    Chatbot,
    Classifier,
}

impl Provenance {
    /// Chatbot and classifier labels carry a confidence, rule labels never do.
    pub fn carries_confidence(self) -> bool {
        matches!(self, Provenance::Chatbot | Provenance::Classifier)
    }
}

/// A binary label together with its provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Label {
    pub value: LabelValue,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

impl Label {
    /// A rule-derived label (no confidence).
    pub fn rule(value: LabelValue, provenance: Provenance) -> Self {
        debug_assert!(!provenance.carries_confidence());
        Self {
            value,
            provenance,
            confidence: None,
        }
    }

    /// Builds a label, enforcing the confidence/provenance pairing.
    pub fn new(value: LabelValue, provenance: Provenance, confidence: Option<f64>) -> Result<Self, CorpusError> {
        match (provenance.carries_confidence(), confidence) {
            (true, Some(c)) if (0.0..=1.0).contains(&c) => {}
            (true, Some(c)) => return Err(CorpusError::InvalidLabel(format!("confidence {c} outside [0,1]"))),
            (true, None) => {
                return Err(CorpusError::InvalidLabel(format!(
                    "{provenance:?} label requires a confidence"
                )))
            }
            (false, Some(_)) => {
                return Err(CorpusError::InvalidLabel(format!(
                    "{provenance:?} label must not carry a confidence"
                )))
            }
            (false, None) => {}
        }
        Ok(Self {
            value,
            provenance,
            confidence,
        })
    }
}

/// Which partition an example belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Test,
    Validation,
}

impl FromStr for SplitName {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(SplitName::Train),
            "test" => Ok(SplitName::Test),
            "validation" | "val" => Ok(SplitName::Validation),
            other => Err(CorpusError::Parse(format!("unknown split `{other}`"))),
        }
    }
}

/// One labeled reference to a publication.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub publication_id: String,
    pub label: Label,
    pub split: Option<SplitName>,
}

/// A named list of labeled examples.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub name: String,
    pub examples: Vec<Example>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, examples: Vec<Example>) -> Self {
        Self {
            name: name.into(),
            examples,
        }
    }

    /// Examples assigned to `split`.
    pub fn in_split(&self, split: SplitName) -> impl Iterator<Item = &Example> {
        self.examples.iter().filter(move |e| e.split == Some(split))
    }

    /// Checks that no publication id repeats within a split.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let mut seen = std::collections::HashSet::new();
        for e in &self.examples {
            if !seen.insert((e.split, e.publication_id.as_str())) {
                return Err(CorpusError::DuplicateId(e.publication_id.clone()));
            }
        }
        Ok(())
    }
}

/// Train/test/validation proportions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub test: f64,
    pub validation: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.70,
            test: 0.15,
            validation: 0.15,
        }
    }
}

impl SplitRatios {
    pub fn new(train: f64, test: f64, validation: f64) -> Result<Self, CorpusError> {
        let r = Self {
            train,
            test,
            validation,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        for (name, v) in [
            ("train", self.train),
            ("test", self.test),
            ("validation", self.validation),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(CorpusError::InvalidRatios(format!("{name} ratio {v} not in (0,1)")));
            }
        }
        let sum = self.train + self.test + self.validation;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CorpusError::InvalidRatios(format!("ratios sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_confidence_pairing() {
        assert!(Label::new(LabelValue::Ai, Provenance::Chatbot, Some(0.9)).is_ok());
        assert!(Label::new(LabelValue::Ai, Provenance::Chatbot, None).is_err());
        assert!(Label::new(LabelValue::Ai, Provenance::ArxivRule, Some(0.9)).is_err());
        assert!(Label::new(LabelValue::Ai, Provenance::Classifier, Some(1.5)).is_err());
    }

    #[test]
    fn ratios_must_sum_to_one() {
        assert!(SplitRatios::default().validate().is_ok());
        assert!(SplitRatios::new(0.7, 0.2, 0.2).is_err());
        assert!(SplitRatios::new(1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn publication_invariants() {
        let p = Publication::new("x", Source::Arxiv, "T", "A", 2020);
        assert!(p.validate().is_ok());
        let mut q = p.clone();
        q.abstract_text.clear();
        assert!(q.validate().is_err());
        q.abstract_missing = true;
        assert!(q.validate().is_ok());
        let mut r = p.clone();
        r.year = 1800;
        assert!(r.validate().is_err());
    }

    #[test]
    fn label_value_parsing() {
        assert_eq!("AI".parse::<LabelValue>().unwrap(), LabelValue::Ai);
        assert_eq!("Non-AI".parse::<LabelValue>().unwrap(), LabelValue::NonAi);
        assert!("maybe".parse::<LabelValue>().is_err());
    }
}
