use serde::{Deserialize, Serialize};

use crate::corpus::LabelValue;

/// Median chatbot probability per confusion cell. Empty cells are absent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CellMedians {
    pub tp: Option<f64>,
    pub fp: Option<f64>,
    pub tn: Option<f64>,
    #[serde(rename = "fn")]
    pub fn_: Option<f64>,
    pub counts: CellSizes,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellSizes {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

/// Median of `values`; the mean of the middle pair for even lengths.
pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        Some(values[mid])
    } else {
        Some((values[mid - 1] + values[mid]) / 2.0)
    }
}

/// Groups `(predicted, gold, probability)` by confusion cell and takes the
/// median probability of each.
pub fn median_probability_by_cell<I>(records: I) -> CellMedians
where
    I: IntoIterator<Item = (LabelValue, LabelValue, f64)>,
{
    let (mut tp, mut fp, mut tn, mut fn_) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (predicted, gold, p) in records {
        match (predicted.is_ai(), gold.is_ai()) {
            (true, true) => tp.push(p),
            (true, false) => fp.push(p),
            (false, false) => tn.push(p),
            (false, true) => fn_.push(p),
        }
    }
    CellMedians {
        counts: CellSizes {
            tp: tp.len() as u64,
            fp: fp.len() as u64,
            tn: tn.len() as u64,
            fn_: fn_.len() as u64,
        },
        tp: median(&mut tp),
        fp: median(&mut fp),
        tn: median(&mut tn),
        fn_: median(&mut fn_),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use LabelValue::{Ai, NonAi};

    #[test]
    fn median_examples() {
        assert_eq!(median(&mut [0.2]), Some(0.2));
        assert!((median(&mut [0.2, 0.95]).unwrap() - 0.575).abs() < 1e-15);
        assert_eq!(median(&mut []), None);
    }

    #[test]
    fn cells_are_routed() {
        let m = median_probability_by_cell([(Ai, Ai, 0.9), (Ai, NonAi, 0.8), (NonAi, NonAi, 0.1)]);
        assert_eq!(m.tp, Some(0.9));
        assert_eq!(m.fp, Some(0.8));
        assert_eq!(m.tn, Some(0.1));
        assert_eq!(m.fn_, None);
        assert_eq!(m.counts.fn_, 0);
    }

    proptest! {
        #[test]
        fn median_is_permutation_invariant_and_bounded(mut v in prop::collection::vec(0.0f64..=1.0, 1..40), seed in any::<u64>()) {
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let a = median(&mut v.clone()).unwrap();
            // Deterministic shuffle driven by the seed.
            let n = v.len();
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                v.swap(i, (s >> 33) as usize % (i + 1));
            }
            let b = median(&mut v).unwrap();
            prop_assert_eq!(a, b);
            prop_assert!(a >= lo && a <= hi);
        }
    }
}
