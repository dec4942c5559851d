use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::corpus::LabelValue;

/// Binary confusion counts with AI as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Adds one `(predicted, gold)` observation.
    pub fn record(&mut self, predicted: LabelValue, gold: LabelValue) {
        match (predicted.is_ai(), gold.is_ai()) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn merge(&mut self, other: &ConfusionCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }
}

/// Which slice of an evaluation a report describes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceDescriptor {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub venue: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
}

impl SliceDescriptor {
    /// `key=value` pairs joined by `;`, in declaration order.
    pub fn label(&self) -> String {
        [
            ("model", &self.model),
            ("prompt", &self.prompt_id),
            ("category", &self.category),
            ("venue", &self.venue),
            ("dataset", &self.dataset),
        ]
        .iter()
        .filter_map(|(k, v)| v.as_ref().map(|v| format!("{k}={v}")))
        .collect::<Vec<_>>()
        .join(";")
    }
}

/// Confusion counts plus derived ratios. Ratios with a zero denominator are
/// absent rather than 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub counts: ConfusionCounts,
    pub accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recall: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slice: Option<SliceDescriptor>,
}

impl MetricsReport {
    pub fn with_slice(mut self, slice: SliceDescriptor) -> Self {
        self.slice = Some(slice);
        self
    }
}

/// Counts `(predicted, gold)` pairs.
pub fn confusion<I>(pairs: I) -> Result<ConfusionCounts, EvalError>
where
    I: IntoIterator<Item = (LabelValue, LabelValue)>,
{
    let mut counts = ConfusionCounts::default();
    for (predicted, gold) in pairs {
        counts.record(predicted, gold);
    }
    if counts.total() == 0 {
        return Err(EvalError::EmptyInput("confusion"));
    }
    Ok(counts)
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Accuracy, precision, recall and F1 from counts.
///
/// F1 is present exactly when both precision and recall are, and is
/// computed as `2tp / (2tp + fp + fn)`, which equals their harmonic mean and
/// is 0 when both are 0.
pub fn metrics(counts: ConfusionCounts) -> Result<MetricsReport, EvalError> {
    let total = counts.total();
    if total == 0 {
        return Err(EvalError::EmptyInput("metrics"));
    }
    let precision = ratio(counts.tp, counts.tp + counts.fp);
    let recall = ratio(counts.tp, counts.tp + counts.fn_);
    let f1 = match (precision, recall) {
        (Some(_), Some(_)) => ratio(2 * counts.tp, 2 * counts.tp + counts.fp + counts.fn_),
        _ => None,
    };
    Ok(MetricsReport {
        counts,
        accuracy: (counts.tp + counts.tn) as f64 / total as f64,
        precision,
        recall,
        f1,
        slice: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use LabelValue::{Ai, NonAi};

    fn counts(tp: u64, fp: u64, fn_: u64, tn: u64) -> ConfusionCounts {
        ConfusionCounts { tp, fp, fn_, tn }
    }

    #[test]
    fn confusion_examples() {
        assert_eq!(confusion([(Ai, Ai)]).unwrap(), counts(1, 0, 0, 0));
        assert_eq!(confusion([(Ai, NonAi), (NonAi, Ai)]).unwrap(), counts(0, 1, 1, 0));
        assert!(matches!(confusion(Vec::new()), Err(EvalError::EmptyInput(_))));
    }

    #[test]
    fn perfect_counts() {
        let m = metrics(counts(5, 0, 0, 5)).unwrap();
        assert_eq!(
            (m.accuracy, m.precision, m.recall, m.f1),
            (1.0, Some(1.0), Some(1.0), Some(1.0))
        );
    }

    #[test]
    fn absent_precision() {
        let m = metrics(counts(0, 0, 3, 7)).unwrap();
        assert!((m.accuracy - 0.7).abs() < 1e-15);
        assert_eq!(m.precision, None);
        assert_eq!(m.recall, Some(0.0));
        assert_eq!(m.f1, None);
    }

    #[test]
    fn hand_computed_fixture() {
        // tp=2 fp=1 fn=1 tn=6: acc = 8/10, p = 2/3, r = 2/3, f1 = 2/3.
        let m = metrics(counts(2, 1, 1, 6)).unwrap();
        assert!((m.accuracy - 0.8).abs() < 1e-12);
        assert!((m.precision.unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.recall.unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.f1.unwrap() - 2.0 / 3.0).abs() < 1e-12);

        // tp=2 fp=1 fn=2 tn=6: p = 2/3, r = 2/4, f1 = 2pr/(p+r) = 4/7.
        let m = metrics(counts(2, 1, 2, 6)).unwrap();
        assert!((m.accuracy - 8.0 / 11.0).abs() < 1e-12);
        assert!((m.precision.unwrap() - 0.6667).abs() < 1e-4);
        assert!((m.recall.unwrap() - 0.5).abs() < 1e-12);
        assert!((m.f1.unwrap() - 0.5714).abs() < 1e-4);
    }

    #[test]
    fn zero_precision_and_recall_gives_zero_f1() {
        let m = metrics(counts(0, 2, 3, 1)).unwrap();
        assert_eq!(m.precision, Some(0.0));
        assert_eq!(m.recall, Some(0.0));
        assert_eq!(m.f1, Some(0.0));
    }

    #[test]
    fn serialized_shape_omits_absent_ratios() {
        let json = serde_json::to_string(&metrics(counts(0, 0, 3, 7)).unwrap()).unwrap();
        assert_eq!(
            json,
            r#"{"counts":{"tp":0,"fp":0,"fn":3,"tn":7},"accuracy":0.7,"recall":0.0}"#
        );
    }
}
