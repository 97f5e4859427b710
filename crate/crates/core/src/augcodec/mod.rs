//! Augmented-language codec: structured labels to bracketed target text
//! and back.
//!
//! ```text
//! [ Over 900 million US dollars | monetary ] of foreign capital ...
//! relationship between [ Jabuka ] and [ Adriatic Basin ] = located in ...
//! ```

mod decode;
mod encode;
mod labels;

pub use decode::decode;
pub use encode::{
    detokenize, encode_dst, encode_joint_er, encode_ner, encode_relation, encode_srl, normalize_commas,
};
pub use labels::{
    has_special_char, is_special, BeliefState, EntitySpan, ReInstance, Relation, Span, SrlArg, StructuredLabel,
    Task, TaskSchema, NOT_GIVEN, SPECIAL_TOKENS,
};

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One task instance: input, gold labels and the encoded target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentedExample {
    pub id: usize,
    pub task: Task,
    pub input_tokens: Vec<String>,
    /// SRL predicate position.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicate: Option<Span>,
    pub labels: Vec<StructuredLabel>,
    pub augmented_target: String,
}

impl AugmentedExample {
    /// Encodes `labels` for `task` and packages the result.
    pub fn build(
        id: usize,
        input_tokens: Vec<String>,
        predicate: Option<Span>,
        mut labels: Vec<StructuredLabel>,
        schema: &TaskSchema,
    ) -> Result<Self> {
        let task = schema.task()?;
        labels.sort();
        let augmented_target = encode_labels(&input_tokens, predicate, &labels, schema)?;
        Ok(Self {
            id,
            task,
            input_tokens,
            predicate,
            labels,
            augmented_target,
        })
    }

    /// Tokens fed to the encoder. SRL marks the predicate in brackets.
    pub fn source_tokens(&self) -> Vec<String> {
        match (self.task, self.predicate) {
            (Task::Srl, Some(p)) if p.end <= self.input_tokens.len() && p.start < p.end => {
                let mut out = self.input_tokens[..p.start].to_vec();
                out.push("[".into());
                out.extend_from_slice(&self.input_tokens[p.start..p.end]);
                out.push("]".into());
                out.extend_from_slice(&self.input_tokens[p.end..]);
                out
            }
            _ => self.input_tokens.clone(),
        }
    }

    pub fn target_tokens(&self) -> Vec<String> {
        self.augmented_target.split_whitespace().map(String::from).collect()
    }
}

/// Dispatches to the encoder for `schema.task`.
pub fn encode_labels(
    tokens: &[String],
    predicate: Option<Span>,
    labels: &[StructuredLabel],
    schema: &TaskSchema,
) -> Result<String> {
    let wrong = |what: &str| Error::Label(format!("{what} label in a {} example", schema.task.map_or("?", Task::as_str)));
    let mut entities = Vec::new();
    let mut relations = Vec::new();
    let mut args = Vec::new();
    let mut beliefs = Vec::new();
    let mut instances = Vec::new();
    for l in labels {
        match l {
            StructuredLabel::Entity(e) => entities.push(e.clone()),
            StructuredLabel::Relation(r) => relations.push(r.clone()),
            StructuredLabel::SrlArg(a) => args.push(a.clone()),
            StructuredLabel::Belief(b) => beliefs.push(b),
            StructuredLabel::ReInstance(r) => instances.push(r),
        }
    }
    match schema.task()? {
        Task::Ner => {
            if labels.len() != entities.len() {
                return Err(wrong("non-entity"));
            }
            encode_ner(tokens, &entities)
        }
        Task::JointEr => {
            if labels.len() != entities.len() + relations.len() {
                return Err(wrong("non-entity"));
            }
            encode_joint_er(tokens, &entities, &relations)
        }
        Task::Srl => {
            if labels.len() != args.len() {
                return Err(wrong("non-argument"));
            }
            let p = predicate.ok_or_else(|| Error::Label("SRL example without a predicate".into()))?;
            Ok(encode_srl(tokens, p, &args)?.1)
        }
        Task::Re => match instances[..] {
            [r] if labels.len() == 1 => encode_relation(tokens, r),
            _ => Err(Error::Label("RE example needs exactly one relation instance".into())),
        },
        Task::Dst => match beliefs[..] {
            [b] if labels.len() == 1 => encode_dst(b, &schema.slot_names),
            _ => Err(Error::Label("DST example needs exactly one belief state".into())),
        },
    }
}

/// Labels in the form [`decode`] returns them: sorted, deduplicated and,
/// for DST, with every slot present.
pub fn canonical_labels(labels: &[StructuredLabel], schema: &TaskSchema) -> Vec<StructuredLabel> {
    let mut out: Vec<StructuredLabel> = labels
        .iter()
        .map(|l| match l {
            StructuredLabel::Belief(b) => {
                let mut c = b.completed(&schema.slot_names);
                c.assignments.values_mut().for_each(|v| *v = v.to_lowercase());
                StructuredLabel::Belief(c)
            }
            other => other.clone(),
        })
        .collect();
    out.sort();
    out.dedup();
    out
}

pub fn write_jsonl(path: &Path, examples: &[AugmentedExample]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for ex in examples {
        serde_json::to_writer(&mut w, ex)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl(path: &Path) -> Result<Vec<AugmentedExample>> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ex = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        out.push(ex);
    }
    Ok(out)
}
