//! Tolerant `(label, probability)` response grammar.
//!
//! Only the first [`PARSE_WINDOW`] characters are read. Label tokens are
//! `non-ai`/`non ai`/`nonai`/`not ai` (Non-AI) and a standalone `ai` (AI),
//! case-insensitively; the Non-AI forms are tried first so `Non-AI` is never
//! read as `AI`. The probability is the first standalone decimal literal.

use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::LabelValue;

pub const PARSE_WINDOW: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseErrorKind {
    MissingLabel,
    MissingProbability,
    ProbabilityOutOfRange,
    ContradictoryLabels,
}

impl ParseErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ParseErrorKind::MissingLabel => "missing_label",
            ParseErrorKind::MissingProbability => "missing_probability",
            ParseErrorKind::ProbabilityOutOfRange => "probability_out_of_range",
            ParseErrorKind::ContradictoryLabels => "contradictory_labels",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub detail: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.detail.is_empty() {
            f.write_str(self.kind.as_str())
        } else {
            write!(f, "{}: {}", self.kind.as_str(), self.detail)
        }
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParsedAnnotation {
    pub label: LabelValue,
    pub probability: f64,
}

fn label_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(?:non|not)[\s\-_]?ai\b|\bai\b").expect("valid label regex"))
}

fn window(raw: &str) -> &str {
    match raw.char_indices().nth(PARSE_WINDOW) {
        Some((end, _)) => &raw[..end],
        None => raw,
    }
}

/// First decimal literal not glued to a word, e.g. `0.95`, `.2`, `1`, `-0.3`.
/// A sign counts only when it is not itself attached to a word, so the `4`
/// in `GPT-4` is skipped rather than read as a number.
fn first_number(text: &str) -> Option<(f64, &str)> {
    let b = text.as_bytes();
    let is_word = |c: u8| c.is_ascii_alphanumeric() || c == b'_' || c >= 0x80;
    let mut i = 0;
    while i < b.len() {
        let starts_digits = b[i].is_ascii_digit() || (b[i] == b'.' && b.get(i + 1).is_some_and(u8::is_ascii_digit));
        if !starts_digits {
            i += 1;
            continue;
        }
        let mut start = i;
        let prev = i.checked_sub(1).map(|p| b[p]);
        let mut glued = prev.is_some_and(|c| is_word(c) || c == b'.');
        if let Some(sign @ (b'-' | b'+')) = prev {
            let before = i.checked_sub(2).map(|p| b[p]);
            if before.is_some_and(is_word) {
                glued = true;
            } else if sign == b'-' {
                start = i - 1;
            }
        }
        let mut end = i;
        while end < b.len() && b[end].is_ascii_digit() {
            end += 1;
        }
        if end < b.len() && b[end] == b'.' && b.get(end + 1).is_some_and(u8::is_ascii_digit) {
            end += 1;
            while end < b.len() && b[end].is_ascii_digit() {
                end += 1;
            }
        }
        if b.get(end).is_some_and(|&c| is_word(c)) {
            glued = true;
        }
        if !glued {
            let lit = &text[start..end];
            if let Ok(v) = lit.parse::<f64>() {
                return Some((v, lit));
            }
        }
        // skip the rest of this run so "v1.2.3" does not yield "2.3"
        i = end.max(i + 1);
        while i < b.len() && (is_word(b[i]) || b[i] == b'.') {
            i += 1;
        }
    }
    None
}

/// Parses a chatbot reply into a label and a probability in `[0, 1]`.
///
/// A reply naming both labels is rejected as contradictory rather than
/// resolved by position.
pub fn parse_response(raw: &str) -> Result<ParsedAnnotation, ParseError> {
    let text = window(raw);
    let err = |kind, detail: String| Err(ParseError { kind, detail });

    let mut labels = label_re()
        .find_iter(text)
        .map(|m| LabelValue::from_is_ai(m.as_str().eq_ignore_ascii_case("ai")));
    let Some(label) = labels.next() else {
        return err(ParseErrorKind::MissingLabel, String::new());
    };
    if labels.any(|l| l != label) {
        return err(ParseErrorKind::ContradictoryLabels, "both AI and Non-AI present".into());
    }

    let Some((probability, literal)) = first_number(text) else {
        return err(ParseErrorKind::MissingProbability, String::new());
    };
    if !(0.0..=1.0).contains(&probability) {
        return err(ParseErrorKind::ProbabilityOutOfRange, literal.to_string());
    }
    Ok(ParsedAnnotation { label, probability })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use LabelValue::{Ai, NonAi};

    fn ok(raw: &str) -> (LabelValue, f64) {
        let p = parse_response(raw).unwrap_or_else(|e| panic!("{raw:?}: {e}"));
        (p.label, p.probability)
    }

    fn kind(raw: &str) -> ParseErrorKind {
        parse_response(raw).unwrap_err().kind
    }

    #[test]
    fn documented_examples() {
        assert_eq!(ok("AI, 0.95"), (Ai, 0.95));
        assert_eq!(ok("Label: Non-AI Score: 0.2"), (NonAi, 0.2));
        assert_eq!(kind("This paper is great."), ParseErrorKind::MissingLabel);
        assert_eq!(kind("AI, 1.7"), ParseErrorKind::ProbabilityOutOfRange);
    }

    #[test]
    fn label_variants() {
        assert_eq!(ok("non ai 0.1").0, NonAi);
        assert_eq!(ok("NonAI (0.3)").0, NonAi);
        assert_eq!(ok("Not AI - .05"), (NonAi, 0.05));
        assert_eq!(ok("**AI** probability 1").0, Ai);
        assert_eq!(ok("0.8 AI"), (Ai, 0.8));
        assert_eq!(
            kind("Non-AI, but uses AI methods. 0.4"),
            ParseErrorKind::ContradictoryLabels
        );
        assert_eq!(kind("MAIN topic 0.5"), ParseErrorKind::MissingLabel);
    }

    #[test]
    fn number_rules() {
        assert_eq!(ok("GPT-4 says AI: 0.9"), (Ai, 0.9));
        assert_eq!(kind("AI, -0.3"), ParseErrorKind::ProbabilityOutOfRange);
        assert_eq!(kind("AI, 95%"), ParseErrorKind::ProbabilityOutOfRange);
        assert_eq!(kind("AI"), ParseErrorKind::MissingProbability);
        assert_eq!(ok("AI v2 0.7"), (Ai, 0.7));
        assert_eq!(ok("AI, probability = 1.0."), (Ai, 1.0));
    }

    #[test]
    fn only_first_window_is_read() {
        let late = format!("AI{} 0.5", " ".repeat(PARSE_WINDOW));
        assert_eq!(kind(&late), ParseErrorKind::MissingProbability);
        let multibyte = format!("AI {} 0.5", "é".repeat(300));
        assert_eq!(kind(&multibyte), ParseErrorKind::MissingProbability);
    }

    proptest! {
        #[test]
        fn never_out_of_range(s in "\\PC{0,120}") {
            if let Ok(p) = parse_response(&s) {
                prop_assert!((0.0..=1.0).contains(&p.probability));
            }
        }

        #[test]
        fn label_then_probability_roundtrip(ai: bool, p in 0.0f64..=1.0, sep in "[ ,;:|]{1,3}") {
            let text = format!("{}{}{:.3}", if ai { "AI" } else { "Non-AI" }, sep, p);
            let parsed = parse_response(&text).unwrap();
            prop_assert_eq!(parsed.label, LabelValue::from_is_ai(ai));
            prop_assert!((parsed.probability - p).abs() <= 5e-4);
        }
    }
}
