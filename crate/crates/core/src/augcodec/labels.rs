use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tokens that carry structure in augmented text.
pub const SPECIAL_TOKENS: [&str; 4] = ["[", "]", "|", "="];

/// Value of a dialogue slot that has not been filled.
pub const NOT_GIVEN: &str = "not given";

pub fn is_special(token: &str) -> bool {
    SPECIAL_TOKENS.contains(&token)
}

/// True if `s` contains any character used by a special token.
pub fn has_special_char(s: &str) -> bool {
    s.chars().any(|c| matches!(c, '[' | ']' | '|' | '='))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Ner,
    Re,
    JointEr,
    Dst,
    Srl,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Ner => "ner",
            Task::Re => "re",
            Task::JointEr => "joint_er",
            Task::Dst => "dst",
            Task::Srl => "srl",
        }
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ner" => Task::Ner,
            "re" => Task::Re,
            "joint_er" => Task::JointEr,
            "dst" => Task::Dst,
            "srl" => Task::Srl,
            other => return Err(Error::Config(format!("unknown task {other:?}"))),
        })
    }
}

/// Half-open token interval `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn check(&self, n_tokens: usize) -> Result<()> {
        if self.start < self.end && self.end <= n_tokens {
            Ok(())
        } else {
            Err(Error::Label(format!(
                "span [{}, {}) invalid for a sentence of {n_tokens} tokens",
                self.start, self.end
            )))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub etype: String,
}

impl EntitySpan {
    pub fn new(start: usize, end: usize, etype: impl Into<String>) -> Self {
        Self {
            start,
            end,
            etype: etype.into(),
        }
    }

    pub fn span(&self) -> Span {
        Span::new(self.start, self.end)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Relation {
    pub head: EntitySpan,
    pub tail: EntitySpan,
    pub rtype: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SrlArg {
    pub start: usize,
    pub end: usize,
    pub role: String,
}

impl SrlArg {
    pub fn new(start: usize, end: usize, role: impl Into<String>) -> Self {
        Self {
            start,
            end,
            role: role.into(),
        }
    }

    pub fn span(&self) -> Span {
        Span::new(self.start, self.end)
    }
}

/// Slot to value map of one dialogue state.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BeliefState {
    pub assignments: BTreeMap<String, String>,
}

impl BeliefState {
    /// Adds `not given` for every schema slot that is missing.
    pub fn completed(&self, slots: &[String]) -> Self {
        let mut assignments = self.assignments.clone();
        for s in slots {
            assignments.entry(s.clone()).or_insert_with(|| NOT_GIVEN.to_string());
        }
        Self { assignments }
    }
}

/// Head and tail spans of a sentence-level relation classification instance.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ReInstance {
    pub head: Span,
    pub tail: Span,
    pub rtype: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StructuredLabel {
    Entity(EntitySpan),
    Relation(Relation),
    SrlArg(SrlArg),
    Belief(BeliefState),
    ReInstance(ReInstance),
}

/// Label inventory for one task.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSchema {
    pub task: Option<Task>,
    #[serde(default)]
    pub entity_types: BTreeSet<String>,
    #[serde(default)]
    pub relation_types: BTreeSet<String>,
    #[serde(default)]
    pub slot_names: Vec<String>,
    #[serde(default)]
    pub role_labels: BTreeSet<String>,
}

fn check_type_string(kind: &str, s: &str, lowercase: bool) -> Result<()> {
    if s.trim().is_empty() || has_special_char(s) || s.trim() != s || s.contains("  ") {
        return Err(Error::Config(format!("invalid {kind} {s:?}")));
    }
    if lowercase && s.to_lowercase() != s {
        return Err(Error::Config(format!("{kind} {s:?} must be lowercase")));
    }
    Ok(())
}

impl TaskSchema {
    pub fn new(task: Task) -> Self {
        Self {
            task: Some(task),
            ..Self::default()
        }
    }

    pub fn with_entity_types<I: IntoIterator<Item = S>, S: Into<String>>(mut self, types: I) -> Self {
        self.entity_types = types.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_relation_types<I: IntoIterator<Item = S>, S: Into<String>>(mut self, types: I) -> Self {
        self.relation_types = types.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_slots<I: IntoIterator<Item = S>, S: Into<String>>(mut self, slots: I) -> Self {
        self.slot_names = slots.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_roles<I: IntoIterator<Item = S>, S: Into<String>>(mut self, roles: I) -> Self {
        self.role_labels = roles.into_iter().map(Into::into).collect();
        self
    }

    pub fn task(&self) -> Result<Task> {
        self.task
            .ok_or_else(|| Error::Config("schema does not name a task".into()))
    }

    /// Entity and relation types are lowercase; SRL role labels keep their
    /// conventional upper case (`A0`, `AM-LOC`).
    pub fn validate(&self) -> Result<()> {
        let task = self.task()?;
        for t in &self.entity_types {
            check_type_string("entity type", t, true)?;
        }
        for t in &self.relation_types {
            check_type_string("relation type", t, true)?;
        }
        for t in &self.slot_names {
            check_type_string("slot name", t, true)?;
        }
        for t in &self.role_labels {
            check_type_string("role label", t, false)?;
            if t.contains(' ') {
                return Err(Error::Config(format!("role label {t:?} must be a single token")));
            }
        }
        if (task == Task::Dst) != !self.slot_names.is_empty() {
            return Err(Error::Config("slot names are required for DST and only for DST".into()));
        }
        let unique: BTreeSet<_> = self.slot_names.iter().collect();
        if unique.len() != self.slot_names.len() {
            return Err(Error::Config("duplicate slot name".into()));
        }
        Ok(())
    }
}
