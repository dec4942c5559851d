use std::collections::{BTreeMap, HashSet};

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::types::{Dataset, LabelValue, Publication, SplitName, SplitRatios};
use super::CorpusError;
use crate::hashing::sha256_hex;

/// Year and citation thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterConfig {
    pub min_year: i32,
    /// Only enforced on publications that carry a citation count.
    pub min_citations: u64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            min_year: 2010,
            min_citations: 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilterOutcome {
    pub kept: Vec<Publication>,
    pub dropped_year: usize,
    pub dropped_citations: usize,
}

/// Order-preserving year/citation filter.
pub fn filter_corpus(pubs: &[Publication], config: FilterConfig) -> FilterOutcome {
    let mut out = FilterOutcome::default();
    for p in pubs {
        if p.year < config.min_year {
            out.dropped_year += 1;
        } else if p.citation_count.is_some_and(|c| c < config.min_citations) {
            out.dropped_citations += 1;
        } else {
            out.kept.push(p.clone());
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dedup {
    pub kept: Vec<Publication>,
    pub duplicate_ids: usize,
    pub duplicate_content: usize,
}

/// Drops repeated ids and exact duplicates of lowercased title+abstract,
/// keeping the first occurrence.
pub fn dedup(pubs: Vec<Publication>) -> Dedup {
    let mut ids = HashSet::new();
    let mut contents = HashSet::new();
    let mut out = Dedup::default();
    for p in pubs {
        if !ids.insert(p.id.clone()) {
            out.duplicate_ids += 1;
            continue;
        }
        let key = sha256_hex(format!("{}\u{1f}{}", p.title.to_lowercase(), p.abstract_text.to_lowercase()).as_bytes());
        if !contents.insert(key) {
            out.duplicate_content += 1;
            continue;
        }
        out.kept.push(p);
    }
    out
}

/// Uniform sample of `n` publications without replacement.
pub fn sample(pubs: &[Publication], n: usize, seed: u64) -> Result<Vec<Publication>, CorpusError> {
    if n > pubs.len() {
        return Err(CorpusError::SampleTooLarge {
            requested: n,
            available: pubs.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(index::sample(&mut rng, pubs.len(), n)
        .into_iter()
        .map(|i| pubs[i].clone())
        .collect())
}

/// Split sizes `(train, test, validation)` for `n` items: test and
/// validation get the floor of their share, train takes the rest.
pub fn split_sizes(n: usize, ratios: &SplitRatios) -> (usize, usize, usize) {
    // The epsilon keeps products such as 0.15 * 20 from flooring to 2.
    let share = |r: f64| ((r * n as f64) + 1e-9).floor() as usize;
    let test = share(ratios.test);
    let validation = share(ratios.validation).min(n - test);
    (n - test - validation, test, validation)
}

/// A three-way partition of some items.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSet<T> {
    pub train: Vec<T>,
    pub test: Vec<T>,
    pub validation: Vec<T>,
    /// Non-fatal notes, e.g. an empty split on a tiny input.
    pub warnings: Vec<String>,
}

/// Seeded, unstratified partition of `items`.
///
/// Items keep their input order within each split.
pub fn split<T: Clone>(items: &[T], ratios: &SplitRatios, seed: u64) -> Result<SplitSet<T>, CorpusError> {
    if items.is_empty() {
        return Err(CorpusError::EmptyDataset);
    }
    ratios.validate()?;
    let assignment = assign_splits(items.len(), ratios, seed);
    let mut set = SplitSet {
        train: Vec::new(),
        test: Vec::new(),
        validation: Vec::new(),
        warnings: empty_split_warnings(items.len(), ratios),
    };
    for (item, which) in items.iter().zip(assignment) {
        match which {
            SplitName::Train => set.train.push(item.clone()),
            SplitName::Test => set.test.push(item.clone()),
            SplitName::Validation => set.validation.push(item.clone()),
        }
    }
    Ok(set)
}

fn assign_splits(n: usize, ratios: &SplitRatios, seed: u64) -> Vec<SplitName> {
    let (_, test, validation) = split_sizes(n, ratios);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut assignment = vec![SplitName::Train; n];
    for &i in &order[..test] {
        assignment[i] = SplitName::Test;
    }
    for &i in &order[test..test + validation] {
        assignment[i] = SplitName::Validation;
    }
    assignment
}

fn empty_split_warnings(n: usize, ratios: &SplitRatios) -> Vec<String> {
    let (train, test, validation) = split_sizes(n, ratios);
    [("train", train), ("test", test), ("validation", validation)]
        .into_iter()
        .filter(|(_, size)| *size == 0)
        .map(|(name, _)| format!("{name} split is empty for {n} examples"))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitStrategy {
    #[default]
    Uniform,
    /// Applies the split rule separately within each label class.
    Stratified,
}

/// Assigns a split to every example of `dataset`. Returns warnings.
pub fn split_dataset(
    dataset: &mut Dataset,
    ratios: &SplitRatios,
    seed: u64,
    strategy: SplitStrategy,
) -> Result<Vec<String>, CorpusError> {
    if dataset.examples.is_empty() {
        return Err(CorpusError::EmptyDataset);
    }
    ratios.validate()?;
    match strategy {
        SplitStrategy::Uniform => {
            let assignment = assign_splits(dataset.examples.len(), ratios, seed);
            for (e, s) in dataset.examples.iter_mut().zip(assignment) {
                e.split = Some(s);
            }
            Ok(empty_split_warnings(dataset.examples.len(), ratios))
        }
        SplitStrategy::Stratified => {
            let mut groups: BTreeMap<LabelValue, Vec<usize>> = BTreeMap::new();
            for (i, e) in dataset.examples.iter().enumerate() {
                groups.entry(e.label.value).or_default().push(i);
            }
            let mut warnings = Vec::new();
            for (value, members) in groups {
                let assignment = assign_splits(members.len(), ratios, seed);
                for (&i, s) in members.iter().zip(assignment) {
                    dataset.examples[i].split = Some(s);
                }
                warnings.extend(
                    empty_split_warnings(members.len(), ratios)
                        .into_iter()
                        .map(|w| format!("{value} class: {w}")),
                );
            }
            Ok(warnings)
        }
    }
}
