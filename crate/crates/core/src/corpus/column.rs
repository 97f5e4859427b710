use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::augcodec::{AugmentedExample, EntitySpan, StructuredLabel, Task, TaskSchema};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Tag<'a> {
    Outside,
    Begin(&'a str),
    Inside(&'a str),
}

fn parse_tag(tag: &str) -> Option<Tag<'_>> {
    match tag {
        "O" => Some(Tag::Outside),
        _ => match tag.split_once('-') {
            Some(("B", t)) if !t.is_empty() => Some(Tag::Begin(t)),
            Some(("I", t)) if !t.is_empty() => Some(Tag::Inside(t)),
            _ => None,
        },
    }
}

/// Entity spans of a BIO tag sequence. An `I-` tag that does not continue
/// a span of the same type starts a new one. Types are lowercased.
pub fn bio_to_spans(tags: &[&str]) -> Option<Vec<EntitySpan>> {
    let mut spans: Vec<EntitySpan> = Vec::new();
    let mut open: Option<(usize, String)> = None;
    for (i, raw) in tags.iter().enumerate() {
        let tag = parse_tag(raw)?;
        let continues = matches!((&open, tag), (Some((_, t)), Tag::Inside(x)) if *t == x.to_lowercase());
        if continues {
            continue;
        }
        if let Some((s, t)) = open.take() {
            spans.push(EntitySpan::new(s, i, t));
        }
        match tag {
            Tag::Begin(t) | Tag::Inside(t) => open = Some((i, t.to_lowercase())),
            Tag::Outside => {}
        }
    }
    if let Some((s, t)) = open {
        spans.push(EntitySpan::new(s, tags.len(), t));
    }
    Some(spans)
}

/// BIO tags for non-overlapping spans; types are uppercased.
pub fn spans_to_bio(n_tokens: usize, spans: &[EntitySpan]) -> Vec<String> {
    let mut tags = vec!["O".to_string(); n_tokens];
    for e in spans {
        let t = e.etype.to_uppercase();
        tags[e.start] = format!("B-{t}");
        for tag in &mut tags[e.start + 1..e.end] {
            *tag = format!("I-{t}");
        }
    }
    tags
}

/// Reads `token<TAB>tag` lines with blank lines between sentences into NER
/// examples. Lines starting with `-DOCSTART-` are skipped.
pub fn load_column_format(path: &Path) -> Result<Vec<AugmentedExample>> {
    let reader = BufReader::new(File::open(path)?);
    let mut sentences: Vec<(Vec<String>, Vec<EntitySpan>)> = Vec::new();
    let mut tokens: Vec<String> = Vec::new();
    let mut tags: Vec<String> = Vec::new();
    let mut flush = |tokens: &mut Vec<String>, tags: &mut Vec<String>| {
        if !tokens.is_empty() {
            let refs: Vec<&str> = tags.iter().map(String::as_str).collect();
            let spans = bio_to_spans(&refs).expect("tags checked per line");
            sentences.push((std::mem::take(tokens), spans));
            tags.clear();
        }
    };
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            flush(&mut tokens, &mut tags);
            continue;
        }
        if line.starts_with("-DOCSTART-") {
            continue;
        }
        let parse_err = |msg: String| Error::Parse { line: i + 1, msg };
        let (token, tag) = line
            .split_once('\t')
            .ok_or_else(|| parse_err(format!("expected token<TAB>tag, got {line:?}")))?;
        let tag = tag.trim();
        if parse_tag(tag).is_none() {
            return Err(parse_err(format!("{tag:?} is not a BIO tag")));
        }
        if token.is_empty() || token.chars().any(char::is_whitespace) {
            return Err(parse_err(format!("bad token {token:?}")));
        }
        tokens.push(token.to_string());
        tags.push(tag.to_string());
    }
    flush(&mut tokens, &mut tags);
    let types: BTreeSet<String> = sentences
        .iter()
        .flat_map(|(_, s)| s.iter().map(|e| e.etype.clone()))
        .collect();
    let schema = TaskSchema::new(Task::Ner).with_entity_types(types);
    sentences
        .into_iter()
        .enumerate()
        .map(|(id, (tokens, spans))| {
            let labels = spans.into_iter().map(StructuredLabel::Entity).collect();
            AugmentedExample::build(id, tokens, None, labels, &schema)
        })
        .collect()
}

/// Writes NER examples back to the column format.
pub fn write_column_format(path: &Path, examples: &[AugmentedExample]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for ex in examples {
        let spans: Vec<EntitySpan> = ex
            .labels
            .iter()
            .filter_map(|l| match l {
                StructuredLabel::Entity(e) => Some(e.clone()),
                _ => None,
            })
            .collect();
        for (tok, tag) in ex.input_tokens.iter().zip(spans_to_bio(ex.input_tokens.len(), &spans)) {
            writeln!(w, "{tok}\t{tag}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}
