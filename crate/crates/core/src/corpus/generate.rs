use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::augcodec::{
    has_special_char, AugmentedExample, BeliefState, EntitySpan, ReInstance, Relation, Span, SrlArg,
    StructuredLabel, Task, TaskSchema,
};
use crate::error::{Error, Result};
use crate::rng::item_stream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntityTypeSpec {
    pub name: String,
    pub lexicon: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationTypeSpec {
    pub name: String,
    pub head: String,
    pub tail: String,
}

/// A relation between two slots of a template, by slot position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemplateRelation {
    pub head: usize,
    pub tail: usize,
    #[serde(rename = "type")]
    pub rtype: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemplateSpec {
    pub text: String,
    #[serde(default)]
    pub relations: Vec<TemplateRelation>,
    /// Literal predicate tokens (SRL).
    #[serde(default)]
    pub predicate: Option<String>,
}

/// Sentence template. Slots are whole tokens written `{type}` or, for SRL,
/// `{type:ROLE}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Template {
    Plain(String),
    Full(TemplateSpec),
}

impl Template {
    fn spec(&self) -> TemplateSpec {
        match self {
            Template::Plain(text) => TemplateSpec {
                text: text.clone(),
                relations: Vec::new(),
                predicate: None,
            },
            Template::Full(s) => s.clone(),
        }
    }
}

/// A dialogue slot with its values and user utterances; utterances contain
/// the token `{value}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotSpec {
    pub name: String,
    pub values: Vec<String>,
    pub utterances: Vec<String>,
}

fn default_max_turns() -> usize {
    3
}

/// Recipe for a synthetic corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub task: Task,
    pub n_sentences: usize,
    pub seed: u64,
    #[serde(default)]
    pub entity_types: Vec<EntityTypeSpec>,
    #[serde(default)]
    pub relation_types: Vec<RelationTypeSpec>,
    #[serde(default)]
    pub templates: Vec<Template>,
    #[serde(default)]
    pub slots: Vec<SlotSpec>,
    #[serde(default)]
    pub system_utterances: Vec<String>,
    #[serde(default = "default_max_turns")]
    pub max_turns: usize,
}

#[derive(Clone, Debug)]
enum Piece {
    Word(String),
    Slot { etype: String, role: Option<String> },
}

fn parse_template(text: &str) -> Vec<Piece> {
    text.split_whitespace()
        .map(|t| match t.strip_prefix('{').and_then(|r| r.strip_suffix('}')) {
            Some(inner) => {
                let (etype, role) = match inner.split_once(':') {
                    Some((e, r)) => (e.to_string(), Some(r.to_string())),
                    None => (inner.to_string(), None),
                };
                Piece::Slot { etype, role }
            }
            None => Piece::Word(t.to_string()),
        })
        .collect()
}

fn spec_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Spec(msg.into()))
}

fn check_surface(what: &str, s: &str) -> Result<()> {
    if s.trim().is_empty() || has_special_char(s) {
        return spec_err(format!("{what} {s:?} is empty or contains a reserved character"));
    }
    Ok(())
}

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

impl GenSpec {
    pub fn schema(&self) -> TaskSchema {
        let mut schema = TaskSchema::new(self.task);
        match self.task {
            Task::Ner | Task::JointEr => {
                schema.entity_types = self.entity_types.iter().map(|e| e.name.clone()).collect();
            }
            _ => {}
        }
        if matches!(self.task, Task::JointEr | Task::Re) {
            schema.relation_types = self.relation_types.iter().map(|r| r.name.clone()).collect();
        }
        if self.task == Task::Srl {
            schema.role_labels = self
                .templates
                .iter()
                .flat_map(|t| parse_template(&t.spec().text))
                .filter_map(|p| match p {
                    Piece::Slot { role, .. } => role,
                    Piece::Word(_) => None,
                })
                .collect();
        }
        if self.task == Task::Dst {
            schema.slot_names = self.slots.iter().map(|s| s.name.clone()).collect();
        }
        schema
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sentences == 0 {
            return spec_err("n_sentences must be positive");
        }
        let lexicons: BTreeMap<&str, &EntityTypeSpec> =
            self.entity_types.iter().map(|e| (e.name.as_str(), e)).collect();
        for e in &self.entity_types {
            if e.lexicon.is_empty() {
                return spec_err(format!("entity type {:?} has an empty lexicon", e.name));
            }
            for w in &e.lexicon {
                check_surface("lexicon entry", w)?;
            }
        }
        let relations: BTreeMap<&str, &RelationTypeSpec> =
            self.relation_types.iter().map(|r| (r.name.as_str(), r)).collect();
        for r in &self.relation_types {
            for t in [&r.head, &r.tail] {
                if !lexicons.contains_key(t.as_str()) {
                    return spec_err(format!("relation {:?} names unknown entity type {t:?}", r.name));
                }
            }
        }
        if self.task == Task::Dst {
            return self.validate_dst();
        }
        if self.templates.is_empty() {
            return spec_err("no templates");
        }
        for t in &self.templates {
            let spec = t.spec();
            let pieces = parse_template(&spec.text);
            let mut slot_types = Vec::new();
            for p in &pieces {
                match p {
                    Piece::Word(w) => check_surface("template word", w)?,
                    Piece::Slot { etype, role } => {
                        if !lexicons.contains_key(etype.as_str()) {
                            return spec_err(format!("template {:?} uses unknown type {etype:?}", spec.text));
                        }
                        if self.task == Task::Srl && role.is_none() {
                            return spec_err(format!("SRL template slot {etype:?} has no role"));
                        }
                        if let Some(r) = role {
                            check_surface("role", r)?;
                        }
                        slot_types.push(etype.as_str());
                    }
                }
            }
            for rel in &spec.relations {
                let Some(sig) = relations.get(rel.rtype.as_str()) else {
                    return spec_err(format!("unknown relation type {:?}", rel.rtype));
                };
                let (Some(h), Some(tl)) = (slot_types.get(rel.head), slot_types.get(rel.tail)) else {
                    return spec_err(format!("relation slot index out of range in {:?}", spec.text));
                };
                if rel.head == rel.tail || *h != sig.head || *tl != sig.tail {
                    return spec_err(format!(
                        "relation {:?} does not fit slots {h:?} -> {tl:?}",
                        rel.rtype
                    ));
                }
            }
            match self.task {
                Task::Re if spec.relations.len() != 1 => {
                    return spec_err("RE templates need exactly one relation");
                }
                Task::Srl => {
                    let Some(pred) = &spec.predicate else {
                        return spec_err("SRL template without a predicate");
                    };
                    let literal: Vec<String> = pieces
                        .iter()
                        .map(|p| match p {
                            Piece::Word(w) => w.clone(),
                            Piece::Slot { .. } => String::new(),
                        })
                        .collect();
                    if find(&literal, &words(pred)).is_none() {
                        return spec_err(format!("predicate {pred:?} not found in {:?}", spec.text));
                    }
                }
                _ => {}
            }
        }
        self.schema().validate()
    }

    fn validate_dst(&self) -> Result<()> {
        if self.slots.is_empty() || self.max_turns == 0 {
            return spec_err("DST specs need slots and max_turns > 0");
        }
        for s in &self.slots {
            if s.values.is_empty() || s.utterances.is_empty() {
                return spec_err(format!("slot {:?} needs values and utterances", s.name));
            }
            for v in &s.values {
                check_surface("slot value", v)?;
                if v.contains(',') {
                    return spec_err(format!("slot value {v:?} contains a comma"));
                }
            }
            for u in &s.utterances {
                if !u.split_whitespace().any(|t| t == "{value}") {
                    return spec_err(format!("utterance {u:?} has no {{value}} token"));
                }
                check_surface("utterance", &u.replace("{value}", "v"))?;
            }
        }
        for u in &self.system_utterances {
            check_surface("system utterance", u)?;
        }
        self.schema().validate()
    }
}

fn find(haystack: &[String], needle: &[String]) -> Option<usize> {
    if needle.is_empty() || needle.len() > haystack.len() {
        return None;
    }
    (0..=haystack.len() - needle.len()).find(|&i| haystack[i..i + needle.len()] == *needle)
}

struct Filled {
    tokens: Vec<String>,
    slots: Vec<(Span, String, Option<String>)>,
    literal: Vec<bool>,
}

fn fill(pieces: &[Piece], lexicons: &BTreeMap<&str, &EntityTypeSpec>, rng: &mut impl Rng) -> Filled {
    let mut used = BTreeSet::new();
    let mut out = Filled {
        tokens: Vec::new(),
        slots: Vec::new(),
        literal: Vec::new(),
    };
    for p in pieces {
        match p {
            Piece::Word(w) => {
                out.tokens.push(w.clone());
                out.literal.push(true);
            }
            Piece::Slot { etype, role } => {
                // Distinct surfaces keep relation tails unambiguous.
                let lexicon = &lexicons[etype.as_str()].lexicon;
                let mut entry = lexicon.choose(rng).unwrap();
                for _ in 0..8 {
                    if !used.contains(entry.as_str()) {
                        break;
                    }
                    entry = lexicon.choose(rng).unwrap();
                }
                used.insert(entry.as_str());
                let start = out.tokens.len();
                out.tokens.extend(words(entry));
                out.literal.resize(out.tokens.len(), false);
                out.slots.push((Span::new(start, out.tokens.len()), etype.clone(), role.clone()));
            }
        }
    }
    out
}

/// Fills templates with lexicon entries (or, for DST, plays out dialogues)
/// and encodes every example. Example `i` depends only on the seed and `i`.
pub fn generate(spec: &GenSpec) -> Result<Vec<AugmentedExample>> {
    spec.validate()?;
    let schema = spec.schema();
    if spec.task == Task::Dst {
        return generate_dst(spec, &schema);
    }
    let lexicons: BTreeMap<&str, &EntityTypeSpec> = spec.entity_types.iter().map(|e| (e.name.as_str(), e)).collect();
    let templates: Vec<(TemplateSpec, Vec<Piece>)> = spec
        .templates
        .iter()
        .map(|t| {
            let s = t.spec();
            let p = parse_template(&s.text);
            (s, p)
        })
        .collect();
    (0..spec.n_sentences)
        .map(|i| {
            let mut rng = item_stream(spec.seed, "generate", i as u64);
            let (tpl, pieces) = templates.choose(&mut rng).unwrap();
            let f = fill(pieces, &lexicons, &mut rng);
            let entity = |k: usize| {
                let (s, t, _) = &f.slots[k];
                EntitySpan::new(s.start, s.end, t.clone())
            };
            let mut predicate = None;
            let labels: Vec<StructuredLabel> = match spec.task {
                Task::Ner => (0..f.slots.len()).map(|k| StructuredLabel::Entity(entity(k))).collect(),
                Task::JointEr => {
                    let mut l: Vec<_> = (0..f.slots.len()).map(|k| StructuredLabel::Entity(entity(k))).collect();
                    l.extend(tpl.relations.iter().map(|r| {
                        StructuredLabel::Relation(Relation {
                            head: entity(r.head),
                            tail: entity(r.tail),
                            rtype: r.rtype.clone(),
                        })
                    }));
                    l
                }
                Task::Re => {
                    let r = &tpl.relations[0];
                    vec![StructuredLabel::ReInstance(ReInstance {
                        head: f.slots[r.head].0,
                        tail: f.slots[r.tail].0,
                        rtype: r.rtype.clone(),
                    })]
                }
                Task::Srl => {
                    let pred = words(tpl.predicate.as_deref().unwrap_or_default());
                    let masked: Vec<String> = f
                        .tokens
                        .iter()
                        .zip(&f.literal)
                        .map(|(t, &lit)| if lit { t.clone() } else { String::new() })
                        .collect();
                    let at = find(&masked, &pred).expect("validated predicate");
                    predicate = Some(Span::new(at, at + pred.len()));
                    f.slots
                        .iter()
                        .filter_map(|(s, _, role)| role.as_ref().map(|r| StructuredLabel::SrlArg(SrlArg::new(s.start, s.end, r.clone()))))
                        .collect()
                }
                Task::Dst => unreachable!(),
            };
            AugmentedExample::build(i, f.tokens, predicate, labels, &schema)
        })
        .collect()
}

/// One example per user turn; the belief state only grows within a
/// dialogue.
fn generate_dst(spec: &GenSpec, schema: &TaskSchema) -> Result<Vec<AugmentedExample>> {
    let mut out = Vec::with_capacity(spec.n_sentences);
    let mut dialogue = 0u64;
    while out.len() < spec.n_sentences {
        let mut rng = item_stream(spec.seed, "dialogue", dialogue);
        dialogue += 1;
        let mut order: Vec<usize> = (0..spec.slots.len()).collect();
        order.shuffle(&mut rng);
        let turns = rng.random_range(1..=spec.max_turns.min(order.len()));
        let mut context: Vec<String> = Vec::new();
        let mut state = BTreeMap::new();
        for &si in order.iter().take(turns) {
            if out.len() == spec.n_sentences {
                break;
            }
            let slot = &spec.slots[si];
            let value = slot.values.choose(&mut rng).unwrap();
            let utterance = slot.utterances.choose(&mut rng).unwrap();
            context.extend(["user".to_string(), ":".to_string()]);
            for t in utterance.split_whitespace() {
                if t == "{value}" {
                    context.extend(words(value));
                } else {
                    context.push(t.to_string());
                }
            }
            state.insert(slot.name.clone(), value.to_lowercase());
            let label = StructuredLabel::Belief(BeliefState { assignments: state.clone() }.completed(&schema.slot_names));
            out.push(AugmentedExample::build(out.len(), context.clone(), None, vec![label], schema)?);
            if let Some(reply) = spec.system_utterances.choose(&mut rng) {
                context.extend(["system".to_string(), ":".to_string()]);
                context.extend(words(reply));
            }
        }
    }
    Ok(out)
}
