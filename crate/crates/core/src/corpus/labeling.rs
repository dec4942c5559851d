use std::collections::BTreeSet;

use super::types::{Label, LabelValue, Provenance, Publication};

/// arXiv categories whose presence (primary or cross-post) marks a
/// publication as AI.
pub const AI_CATEGORIES: [&str; 7] = ["cs.AI", "cs.CL", "cs.CV", "cs.LG", "cs.MA", "cs.RO", "stat.ML"];

/// Sub-field concepts that mark an OpenAlex work as AI when ranked top.
pub const AI_CONCEPTS: [&str; 4] = [
    "artificial intelligence",
    "computer vision",
    "machine learning",
    "natural language processing",
];

/// Concept level holding sub-fields such as "machine learning".
const SUBFIELD_LEVEL: u32 = 1;

pub fn default_ai_categories() -> BTreeSet<String> {
    AI_CATEGORIES.iter().map(|s| s.to_string()).collect()
}

pub fn default_ai_concepts() -> BTreeSet<String> {
    AI_CONCEPTS.iter().map(|s| s.to_string()).collect()
}

/// AI iff any of the publication's categories is in `ai_categories`.
pub fn assign_arxiv_label(publication: &Publication, ai_categories: &BTreeSet<String>) -> Label {
    let hit = publication.categories.iter().any(|c| ai_categories.contains(c));
    Label::rule(LabelValue::from_is_ai(hit), Provenance::ArxivRule)
}

/// Outcome of the concept rule.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptLabeling {
    pub label: Label,
    /// The winning sub-field concept, if any.
    pub top_concept: Option<String>,
    /// Set when no sub-field concept was available to decide on.
    pub no_concepts: bool,
}

/// AI iff the highest-scoring level-1 concept is in `ai_concepts`.
///
/// Names compare case-insensitively; score ties go to the lexicographically
/// smallest lowercased name.
pub fn assign_concept_label(publication: &Publication, ai_concepts: &BTreeSet<String>) -> ConceptLabeling {
    let top = publication
        .concepts
        .iter()
        .filter(|c| c.level == SUBFIELD_LEVEL)
        .map(|c| (c.score, c.name.to_lowercase()))
        .min_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    match top {
        Some((_, name)) => {
            let is_ai = ai_concepts.iter().any(|c| c.to_lowercase() == name);
            ConceptLabeling {
                label: Label::rule(LabelValue::from_is_ai(is_ai), Provenance::ConceptRule),
                top_concept: Some(name),
                no_concepts: false,
            }
        }
        None => ConceptLabeling {
            label: Label::rule(LabelValue::NonAi, Provenance::ConceptRule),
            top_concept: None,
            no_concepts: true,
        },
    }
}
