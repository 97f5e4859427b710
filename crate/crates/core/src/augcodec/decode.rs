//! Tolerant parsing of generated augmented text back into labels.

use std::collections::{BTreeMap, BTreeSet};

use crate::align::{needleman_wunsch, AlignScoring};
use crate::error::Result;

use super::encode::normalize_commas;
use super::labels::{
    is_special, BeliefState, EntitySpan, ReInstance, Relation, Span, SrlArg, StructuredLabel, Task, TaskSchema,
    NOT_GIVEN,
};

#[derive(Clone, Debug, PartialEq)]
enum Item {
    Plain(String),
    /// `|`-separated fields of one bracket group.
    Group(Vec<Vec<String>>),
}

/// Splits on whitespace and groups brackets. An unclosed group ends at the
/// next `[` or at the end of the string; separators outside a group are
/// kept as plain tokens.
fn parse(generated: &str) -> Vec<Item> {
    let mut items = Vec::new();
    let mut open: Option<Vec<Vec<String>>> = None;
    for tok in generated.split_whitespace() {
        match (tok, open.as_mut()) {
            ("[", _) => {
                if let Some(g) = open.take() {
                    items.push(Item::Group(g));
                }
                open = Some(vec![Vec::new()]);
            }
            ("]", Some(_)) => items.push(Item::Group(open.take().unwrap())),
            ("|", Some(g)) => g.push(Vec::new()),
            (_, Some(g)) => g.last_mut().unwrap().push(tok.to_string()),
            (_, None) => items.push(Item::Plain(tok.to_string())),
        }
    }
    if let Some(g) = open {
        items.push(Item::Group(g));
    }
    items
}

fn words(tokens: &[String]) -> Vec<&str> {
    tokens.iter().map(String::as_str).filter(|t| !is_special(t)).collect()
}

fn joined(tokens: &[String]) -> String {
    words(tokens).join(" ")
}

struct Grounded {
    span: Option<Span>,
    fields: Vec<Vec<String>>,
}

/// Removes structure, aligns what is left to the input and maps each group
/// to the input tokens its first field aligned with.
fn ground(items: &[Item], input: &[String]) -> Vec<Grounded> {
    let mut cleaned: Vec<&str> = Vec::new();
    let mut ranges = Vec::new();
    for item in items {
        match item {
            Item::Plain(t) if !is_special(t) => cleaned.push(t),
            Item::Plain(_) => {}
            Item::Group(fields) => {
                let start = cleaned.len();
                cleaned.extend(words(&fields[0]));
                ranges.push((start, cleaned.len(), fields));
            }
        }
    }
    let input: Vec<&str> = input.iter().map(String::as_str).collect();
    let map = needleman_wunsch(&cleaned, &input, &AlignScoring::normalized_edit()).a_to_b(cleaned.len());
    ranges
        .into_iter()
        .map(|(s, e, fields)| Grounded {
            span: span_of(&map[s..e]),
            fields: fields.clone(),
        })
        .collect()
}

fn span_of(mapped: &[Option<usize>]) -> Option<Span> {
    let hits = mapped.iter().flatten();
    let lo = hits.clone().min()?;
    let hi = hits.max()?;
    Some(Span::new(*lo, hi + 1))
}

/// Aligns one token group on its own against the input.
fn ground_alone(tokens: &[String], input: &[String]) -> Option<Span> {
    let a = words(tokens);
    let b: Vec<&str> = input.iter().map(String::as_str).collect();
    let map = needleman_wunsch(&a, &b, &AlignScoring::normalized_edit()).a_to_b(a.len());
    span_of(&map)
}

/// Keeps the earliest-starting of any overlapping spans; among equal
/// starts the one generated first wins.
fn drop_overlaps<T>(mut found: Vec<(Span, T)>) -> Vec<(Span, T)> {
    found.sort_by_key(|(s, _)| s.start);
    let mut kept: Vec<(Span, T)> = Vec::new();
    for (s, v) in found {
        if kept.iter().all(|(k, _)| !k.overlaps(&s)) {
            kept.push((s, v));
        }
    }
    kept
}

/// Recovers labels from a generated string.
///
/// Never fails on content: malformed structure is repaired or ignored and
/// labels whose type is not in `schema` are discarded. Errors come only
/// from an invalid schema. The result is sorted and free of duplicates.
pub fn decode(generated: &str, input_tokens: &[String], schema: &TaskSchema) -> Result<Vec<StructuredLabel>> {
    let task = schema.task()?;
    let items = parse(generated);
    let mut labels = match task {
        Task::Ner => decode_entities(&items, input_tokens, schema, false),
        Task::JointEr => decode_entities(&items, input_tokens, schema, true),
        Task::Srl => decode_srl(&items, input_tokens, schema),
        Task::Re => decode_re(&items, input_tokens, schema),
        Task::Dst => vec![StructuredLabel::Belief(decode_dst(&items, &schema.slot_names))],
    };
    labels.sort();
    labels.dedup();
    Ok(labels)
}

fn decode_entities(items: &[Item], input: &[String], schema: &TaskSchema, relations: bool) -> Vec<StructuredLabel> {
    let grounded = ground(items, input);
    let found: Vec<(Span, (String, &[Vec<String>]))> = grounded
        .iter()
        .filter_map(|g| {
            let span = g.span?;
            let etype = joined(g.fields.get(1)?);
            schema
                .entity_types
                .contains(&etype)
                .then(|| (span, (etype, &g.fields[2..])))
        })
        .collect();
    let kept = drop_overlaps(found);
    let entities: Vec<EntitySpan> = kept
        .iter()
        .map(|(s, (t, _))| EntitySpan::new(s.start, s.end, t.clone()))
        .collect();
    let mut out: Vec<StructuredLabel> = entities.iter().cloned().map(StructuredLabel::Entity).collect();
    if !relations {
        return out;
    }
    let surface: Vec<String> = entities
        .iter()
        .map(|e| normalize_commas(&input[e.start..e.end].join(" ")))
        .collect();
    for (head, (_, (_, rel_fields))) in entities.iter().zip(&kept) {
        for field in rel_fields.iter() {
            let Some(eq) = field.iter().position(|t| t == "=") else {
                continue;
            };
            let rtype = joined(&field[..eq]);
            if !schema.relation_types.contains(&rtype) {
                continue;
            }
            let tail_text = normalize_commas(&joined(&field[eq + 1..]));
            if let Some(tail) = resolve_tail(head, &tail_text, &entities, &surface) {
                out.push(StructuredLabel::Relation(Relation {
                    head: head.clone(),
                    tail: tail.clone(),
                    rtype,
                }));
            }
        }
    }
    out
}

/// The entity whose surface text equals `text`; with several candidates the
/// nearest one after the head wins, then the nearest one before it.
fn resolve_tail<'a>(
    head: &EntitySpan,
    text: &str,
    entities: &'a [EntitySpan],
    surface: &[String],
) -> Option<&'a EntitySpan> {
    let candidates = entities.iter().zip(surface).filter(|(_, s)| *s == text).map(|(e, _)| e);
    let after = candidates.clone().filter(|e| e.start >= head.end).min_by_key(|e| e.start);
    after.or_else(|| candidates.filter(|e| e.end <= head.start).max_by_key(|e| e.start))
}

fn decode_srl(items: &[Item], input: &[String], schema: &TaskSchema) -> Vec<StructuredLabel> {
    let found: Vec<(Span, String)> = ground(items, input)
        .into_iter()
        .filter_map(|g| {
            let role = joined(g.fields.get(1)?);
            (schema.role_labels.contains(&role)).then_some((g.span?, role))
        })
        .collect();
    drop_overlaps(found)
        .into_iter()
        .map(|(s, r)| StructuredLabel::SrlArg(SrlArg::new(s.start, s.end, r)))
        .collect()
}

fn decode_re(items: &[Item], input: &[String], schema: &TaskSchema) -> Vec<StructuredLabel> {
    let groups: Vec<(usize, &Vec<String>)> = items
        .iter()
        .enumerate()
        .filter_map(|(i, it)| match it {
            Item::Group(f) if !words(&f[0]).is_empty() => Some((i, &f[0])),
            _ => None,
        })
        .take(2)
        .collect();
    let [(_, head), (after, tail)] = groups[..] else {
        return Vec::new();
    };
    let rest: Vec<String> = items[after + 1..]
        .iter()
        .filter_map(|it| match it {
            Item::Plain(t) => Some(t.clone()),
            Item::Group(_) => None,
        })
        .collect();
    let rtype_tokens = match rest.iter().position(|t| t == "=") {
        Some(eq) => &rest[eq + 1..],
        None => &rest[..],
    };
    let rtype = joined(rtype_tokens);
    if !schema.relation_types.contains(&rtype) {
        return Vec::new();
    }
    match (ground_alone(head, input), ground_alone(tail, input)) {
        (Some(head), Some(tail)) => vec![StructuredLabel::ReInstance(ReInstance { head, tail, rtype })],
        _ => Vec::new(),
    }
}

/// Reads `slot value` segments between the belief markers. Slot names are
/// matched by longest token prefix; unknown or repeated slots are ignored
/// and missing ones are `not given`.
fn decode_dst(items: &[Item], slots: &[String]) -> BeliefState {
    let is_marker = |it: &Item| matches!(it, Item::Group(f) if joined(&f[0]) == "belief");
    let body: &[Item] = match items.iter().position(is_marker) {
        Some(open) => {
            let rest = &items[open + 1..];
            let close = rest.iter().position(|it| matches!(it, Item::Group(_))).unwrap_or(rest.len());
            &rest[..close]
        }
        None => items,
    };
    let text = body
        .iter()
        .filter_map(|it| match it {
            Item::Plain(t) if !is_special(t) => Some(t.to_lowercase()),
            _ => None,
        })
        .collect::<Vec<_>>()
        .join(" ");
    let slot_tokens: Vec<Vec<&str>> = slots.iter().map(|s| s.split(' ').collect()).collect();
    let mut assignments = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for segment in text.split(',') {
        let toks: Vec<&str> = segment.split_whitespace().collect();
        let best = slot_tokens
            .iter()
            .enumerate()
            .filter(|(_, s)| s.len() < toks.len() && toks[..s.len()] == s[..])
            .max_by_key(|(i, s)| (s.len(), std::cmp::Reverse(*i)));
        if let Some((i, s)) = best {
            if seen.insert(i) {
                assignments.insert(slots[i].clone(), toks[s.len()..].join(" "));
            }
        }
    }
    for s in slots {
        assignments.entry(s.clone()).or_insert_with(|| NOT_GIVEN.to_string());
    }
    BeliefState { assignments }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn ner_schema(types: &[&str]) -> TaskSchema {
        TaskSchema::new(Task::Ner).with_entity_types(types.iter().copied())
    }

    #[test]
    fn parser_closes_and_splits_groups() {
        let items = parse("a [ b | c [ d ] ] |");
        assert_eq!(
            items,
            vec![
                Item::Plain("a".into()),
                Item::Group(vec![vec!["b".into()], vec!["c".into()]]),
                Item::Group(vec![vec!["d".into()]]),
                Item::Plain("]".into()),
                Item::Plain("|".into()),
            ]
        );
    }

    #[test]
    fn invalid_type_is_discarded() {
        let labels = decode("[ Paris | planet ]", &toks("Paris"), &ner_schema(&["location"])).unwrap();
        assert!(labels.is_empty());
    }

    #[test]
    fn typo_is_absorbed_by_alignment() {
        let labels = decode(
            "[ Pariss | location ] is nice",
            &toks("Paris is nice"),
            &ner_schema(&["location"]),
        )
        .unwrap();
        assert_eq!(labels, vec![StructuredLabel::Entity(EntitySpan::new(0, 1, "location"))]);
    }

    #[test]
    fn unbalanced_bracket_closes_at_end() {
        let labels = decode("a [ b c | x", &toks("a b c"), &ner_schema(&["x"])).unwrap();
        assert_eq!(labels, vec![StructuredLabel::Entity(EntitySpan::new(1, 3, "x"))]);
    }

    #[test]
    fn overlapping_predictions_keep_the_earlier_start() {
        let found = vec![(Span::new(1, 3), "b"), (Span::new(0, 2), "a"), (Span::new(2, 4), "c"), (Span::new(1, 2), "d")];
        let kept: Vec<_> = drop_overlaps(found).into_iter().map(|(_, v)| v).collect();
        assert_eq!(kept, vec!["a", "c"]);
    }

    #[test]
    fn duplicate_predictions_collapse() {
        let labels = decode("[ a | x ] [ a | x ]", &toks("a"), &ner_schema(&["x"])).unwrap();
        assert_eq!(labels.len(), 1);
    }

    #[test]
    fn dst_prefers_longest_slot_and_fills_defaults() {
        let slots = vec!["hotel book".to_string(), "hotel book day".to_string(), "area".to_string()];
        let items = parse("[ belief ] hotel book day monday, hotel book x [ belief ]");
        let state = decode_dst(&items, &slots);
        assert_eq!(state.assignments["hotel book day"], "monday");
        assert_eq!(state.assignments["hotel book"], "x");
        assert_eq!(state.assignments["area"], NOT_GIVEN);
    }

    #[test]
    fn re_without_two_groups_is_empty() {
        let schema = TaskSchema::new(Task::Re).with_relation_types(["r"]);
        assert!(decode("relationship between [ a ] = r", &toks("a b"), &schema).unwrap().is_empty());
    }
}
