//! The 3×3 persona × clause zero-shot prompt matrix.
//!
//! Prompt text lives in a sectioned plain-text file (`data/prompts.v1.txt`
//! ships as the default). Each section is headed by `[<persona>+<clause>]`
//! and its body is the system prompt. Lines starting with `#` are comments.
//! The SHA-256 of the file bytes is recorded in every annotation manifest
//! and folded into every cache key.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Publication;
use crate::hashing::sha256_hex;

/// Shipped prompt file.
pub const DEFAULT_PROMPT_FILE: &str = include_str!("../data/prompts.v1.txt");

/// User-message layout with `{title}` and `{abstract}` slots.
pub const USER_TEMPLATE: &str = "Title: {title}\nAbstract: {abstract}";

/// Default character budget for a user message.
pub const DEFAULT_USER_BUDGET: usize = 8_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("unknown prompt id `{0}` (expected <reader|researcher|expert>+<base|U|UC>)")]
    UnknownId(String),
    #[error("prompt file has no section for `{0}`")]
    MissingSection(String),
    #[error("prompt file line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("publication `{0}` has an empty title")]
    EmptyTitle(String),
    #[error("cannot read prompt file: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Persona {
    Reader,
    Researcher,
    Expert,
}

impl Persona {
    pub const ALL: [Persona; 3] = [Persona::Reader, Persona::Researcher, Persona::Expert];

    pub fn as_str(self) -> &'static str {
        match self {
            Persona::Reader => "reader",
            Persona::Researcher => "researcher",
            Persona::Expert => "expert",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clause {
    Base,
    Uncertainty,
    UncertaintyClarity,
}

impl Clause {
    pub const ALL: [Clause; 3] = [Clause::Base, Clause::Uncertainty, Clause::UncertaintyClarity];

    /// Suffix used in prompt ids.
    pub fn tag(self) -> &'static str {
        match self {
            Clause::Base => "base",
            Clause::Uncertainty => "U",
            Clause::UncertaintyClarity => "UC",
        }
    }
}

/// One cell of the prompt matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PromptSpec {
    pub persona: Persona,
    pub clause: Clause,
}

impl PromptSpec {
    pub fn new(persona: Persona, clause: Clause) -> Self {
        Self { persona, clause }
    }

    /// `"<persona>+<clause tag>"`, e.g. `expert+UC`.
    pub fn id(&self) -> String {
        format!("{}+{}", self.persona.as_str(), self.clause.tag())
    }
}

impl fmt::Display for PromptSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl FromStr for PromptSpec {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || PromptError::UnknownId(s.to_string());
        let (p, c) = s.trim().split_once('+').ok_or_else(unknown)?;
        let persona = Persona::ALL
            .into_iter()
            .find(|x| x.as_str().eq_ignore_ascii_case(p))
            .ok_or_else(unknown)?;
        let clause = Clause::ALL
            .into_iter()
            .find(|x| x.tag().eq_ignore_ascii_case(c))
            .ok_or_else(unknown)?;
        Ok(Self { persona, clause })
    }
}

impl Serialize for PromptSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.id())
    }
}

impl<'de> Deserialize<'de> for PromptSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// All nine cells, personas (reader, researcher, expert) outer and clauses
/// (base, +U, +UC) inner.
pub fn prompt_matrix() -> Vec<PromptSpec> {
    Persona::ALL
        .into_iter()
        .flat_map(|p| Clause::ALL.into_iter().map(move |c| PromptSpec::new(p, c)))
        .collect()
}

/// A system prompt plus the user-message template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedPrompt {
    pub id: String,
    pub system_text: String,
    pub user_template: String,
}

/// Parsed prompt file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSet {
    sections: BTreeMap<String, String>,
    checksum: String,
}

impl PromptSet {
    /// The shipped prompt file.
    pub fn builtin() -> Self {
        Self::parse(DEFAULT_PROMPT_FILE).expect("shipped prompt file parses")
    }

    pub fn load(path: &Path) -> Result<Self, PromptError> {
        let text = std::fs::read_to_string(path).map_err(|e| PromptError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, PromptError> {
        let mut sections: BTreeMap<String, String> = BTreeMap::new();
        let mut current: Option<(String, Vec<&str>)> = None;
        let finish = |cur: Option<(String, Vec<&str>)>, sections: &mut BTreeMap<String, String>| {
            if let Some((id, lines)) = cur {
                sections.insert(id, lines.join("\n").trim().to_string());
            }
        };
        for (i, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.starts_with('#') {
                continue;
            }
            if let Some(header) = trimmed.strip_prefix('[').and_then(|h| h.strip_suffix(']')) {
                let spec: PromptSpec = header.parse().map_err(|_| PromptError::Syntax {
                    line: i + 1,
                    reason: format!("unknown section `{header}`"),
                })?;
                if sections.contains_key(&spec.id()) || current.as_ref().is_some_and(|(id, _)| *id == spec.id()) {
                    return Err(PromptError::Syntax {
                        line: i + 1,
                        reason: format!("duplicate section `{}`", spec.id()),
                    });
                }
                finish(current.take(), &mut sections);
                current = Some((spec.id(), Vec::new()));
                continue;
            }
            match current.as_mut() {
                Some((_, lines)) => lines.push(line),
                None if trimmed.is_empty() => {}
                None => {
                    return Err(PromptError::Syntax {
                        line: i + 1,
                        reason: "text outside a section".to_string(),
                    })
                }
            }
        }
        finish(current.take(), &mut sections);
        Ok(Self {
            sections,
            checksum: sha256_hex(text.as_bytes()),
        })
    }

    /// SHA-256 hex digest of the prompt file bytes.
    pub fn checksum(&self) -> &str {
        &self.checksum
    }

    pub fn render(&self, spec: PromptSpec) -> Result<RenderedPrompt, PromptError> {
        let id = spec.id();
        let system_text = self
            .sections
            .get(&id)
            .ok_or_else(|| PromptError::MissingSection(id.clone()))?
            .clone();
        Ok(RenderedPrompt {
            id,
            system_text,
            user_template: USER_TEMPLATE.to_string(),
        })
    }
}

/// Renders `spec` from the shipped prompt file.
pub fn render_prompt(spec: PromptSpec) -> RenderedPrompt {
    PromptSet::builtin()
        .render(spec)
        .expect("shipped prompt file covers the matrix")
}

/// A built user message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserMessage {
    pub text: String,
    pub truncated: bool,
}

/// `"Title: {title}\nAbstract: {abstract}"` with whitespace runs collapsed,
/// cut at `budget` characters.
pub fn build_user_message(publication: &Publication, budget: usize) -> Result<UserMessage, PromptError> {
    let collapse = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ");
    let title = collapse(&publication.title);
    if title.is_empty() {
        return Err(PromptError::EmptyTitle(publication.id.clone()));
    }
    let text = USER_TEMPLATE
        .replace("{title}", &title)
        .replace("{abstract}", &collapse(&publication.abstract_text));
    match text.char_indices().nth(budget) {
        Some((cut, _)) => Ok(UserMessage {
            text: text[..cut].to_string(),
            truncated: true,
        }),
        None => Ok(UserMessage { text, truncated: false }),
    }
}
