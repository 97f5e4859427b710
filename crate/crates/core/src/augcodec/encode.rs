use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::labels::{BeliefState, EntitySpan, ReInstance, Relation, Span, SrlArg, NOT_GIVEN};

/// Joins tokens for display inside a relation: no space before commas.
pub fn detokenize(tokens: &[impl AsRef<str>]) -> String {
    let joined = tokens.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(" ");
    normalize_commas(&joined)
}

pub fn normalize_commas(s: &str) -> String {
    s.replace(" ,", ",")
}

fn check_token(t: &str) -> Result<()> {
    if t.is_empty() || t.chars().any(char::is_whitespace) {
        return Err(Error::Label(format!("token {t:?} is empty or contains whitespace")));
    }
    Ok(())
}

/// Sorts `spans` by start and rejects out-of-range or overlapping ones.
fn ordered_spans(spans: &[Span], n_tokens: usize) -> Result<Vec<usize>> {
    let mut order: Vec<usize> = (0..spans.len()).collect();
    order.sort_by_key(|&i| (spans[i].start, spans[i].end));
    for &i in &order {
        spans[i].check(n_tokens)?;
    }
    for w in order.windows(2) {
        if spans[w[0]].overlaps(&spans[w[1]]) {
            return Err(Error::Label(format!(
                "overlapping spans [{}, {}) and [{}, {})",
                spans[w[0]].start, spans[w[0]].end, spans[w[1]].start, spans[w[1]].end
            )));
        }
    }
    Ok(order)
}

/// Wraps every span as `[ tokens | extra... ]`, copying the rest verbatim.
fn bracket(tokens: &[String], spans: &[Span], extras: &[Vec<String>]) -> Result<String> {
    for t in tokens {
        check_token(t)?;
    }
    let order = ordered_spans(spans, tokens.len())?;
    let mut out: Vec<&str> = Vec::with_capacity(tokens.len() + 4 * spans.len());
    let mut pos = 0;
    for i in order {
        let s = spans[i];
        out.extend(tokens[pos..s.start].iter().map(String::as_str));
        out.push("[");
        out.extend(tokens[s.start..s.end].iter().map(String::as_str));
        for e in &extras[i] {
            out.push("|");
            out.push(e);
        }
        out.push("]");
        pos = s.end;
    }
    out.extend(tokens[pos..].iter().map(String::as_str));
    Ok(out.join(" "))
}

pub fn encode_ner(tokens: &[String], entities: &[EntitySpan]) -> Result<String> {
    let spans: Vec<Span> = entities.iter().map(EntitySpan::span).collect();
    let extras: Vec<Vec<String>> = entities.iter().map(|e| vec![e.etype.clone()]).collect();
    bracket(tokens, &spans, &extras)
}

pub fn encode_relation(tokens: &[String], instance: &ReInstance) -> Result<String> {
    for t in tokens {
        check_token(t)?;
    }
    instance.head.check(tokens.len())?;
    instance.tail.check(tokens.len())?;
    let text = |s: Span| tokens[s.start..s.end].join(" ");
    Ok(format!(
        "relationship between [ {} ] and [ {} ] = {}",
        text(instance.head),
        text(instance.tail),
        instance.rtype
    ))
}

/// Entities as in NER; a relation head additionally lists
/// `| rtype = tail text` per relation, ordered by tail position.
pub fn encode_joint_er(tokens: &[String], entities: &[EntitySpan], relations: &[Relation]) -> Result<String> {
    let mut by_head: BTreeMap<usize, Vec<&Relation>> = BTreeMap::new();
    for r in relations {
        let head = entities.iter().position(|e| *e == r.head);
        let tail_known = entities.contains(&r.tail);
        match head {
            Some(h) if tail_known => by_head.entry(h).or_default().push(r),
            _ => {
                return Err(Error::Label(format!(
                    "relation {:?} refers to an entity that is not labelled",
                    r.rtype
                )))
            }
        }
    }
    // Check spans before slicing tokens for tail text.
    let spans: Vec<Span> = entities.iter().map(EntitySpan::span).collect();
    ordered_spans(&spans, tokens.len())?;
    let extras: Vec<Vec<String>> = entities
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let mut fields = vec![e.etype.clone()];
            let mut rels = by_head.remove(&i).unwrap_or_default();
            rels.sort_by(|a, b| (a.tail.start, a.tail.end, &a.rtype).cmp(&(b.tail.start, b.tail.end, &b.rtype)));
            for r in rels {
                let tail = detokenize(&tokens[r.tail.start..r.tail.end]);
                fields.push(format!("{} = {}", r.rtype, tail));
            }
            fields
        })
        .collect();
    bracket(tokens, &spans, &extras)
}

/// `[ belief ] slot value, ... [ belief ]` over every schema slot in order.
/// Values are lowercased.
pub fn encode_dst(state: &BeliefState, slots: &[String]) -> Result<String> {
    if let Some(unknown) = state.assignments.keys().find(|k| !slots.contains(k)) {
        return Err(Error::Label(format!("slot {unknown:?} is not in the schema")));
    }
    let parts: Vec<String> = slots
        .iter()
        .map(|s| {
            let v = state
                .assignments
                .get(s)
                .map(|v| v.to_lowercase())
                .unwrap_or_else(|| NOT_GIVEN.to_string());
            if v.contains(',') || v.trim().is_empty() {
                return Err(Error::Label(format!("value {v:?} for slot {s:?} cannot be encoded")));
            }
            Ok(format!("{s} {v}"))
        })
        .collect::<Result<_>>()?;
    Ok(format!("[ belief ] {} [ belief ]", parts.join(", ")))
}

/// Returns the input with the predicate bracketed and the target with each
/// argument wrapped as `[ span | ROLE ]`.
pub fn encode_srl(tokens: &[String], predicate: Span, args: &[SrlArg]) -> Result<(String, String)> {
    predicate.check(tokens.len())?;
    let spans: Vec<Span> = args.iter().map(SrlArg::span).collect();
    if let Some(a) = spans.iter().find(|s| s.overlaps(&predicate)) {
        return Err(Error::Label(format!(
            "argument [{}, {}) overlaps the predicate",
            a.start, a.end
        )));
    }
    let marked = bracket(tokens, &[predicate], &[Vec::new()])?;
    let extras: Vec<Vec<String>> = args.iter().map(|a| vec![a.role.clone()]).collect();
    Ok((marked, bracket(tokens, &spans, &extras)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn ner_identity_and_single_token() {
        let t = toks("a b c");
        assert_eq!(encode_ner(&t, &[]).unwrap(), "a b c");
        let p = toks("Paris");
        assert_eq!(
            encode_ner(&p, &[EntitySpan::new(0, 1, "location")]).unwrap(),
            "[ Paris | location ]"
        );
    }

    #[test]
    fn ner_rejects_overlap_and_bounds() {
        let t = toks("a b c d");
        let overlap = [EntitySpan::new(0, 2, "x"), EntitySpan::new(1, 3, "y")];
        assert!(matches!(encode_ner(&t, &overlap), Err(Error::Label(_))));
        assert!(encode_ner(&t, &[EntitySpan::new(3, 5, "x")]).is_err());
        assert!(encode_ner(&t, &[EntitySpan::new(2, 2, "x")]).is_err());
    }

    #[test]
    fn relation_self_pair() {
        let t = toks("X");
        let r = ReInstance {
            head: Span::new(0, 1),
            tail: Span::new(0, 1),
            rtype: "self".into(),
        };
        assert_eq!(encode_relation(&t, &r).unwrap(), "relationship between [ X ] and [ X ] = self");
    }

    #[test]
    fn joint_er_without_relations_matches_ner() {
        let t = toks("a b c d");
        let e = [EntitySpan::new(1, 3, "per")];
        assert_eq!(encode_joint_er(&t, &e, &[]).unwrap(), encode_ner(&t, &e).unwrap());
    }

    #[test]
    fn joint_er_rejects_unknown_entity() {
        let t = toks("a b c d");
        let e = [EntitySpan::new(0, 1, "per")];
        let r = Relation {
            head: e[0].clone(),
            tail: EntitySpan::new(2, 3, "loc"),
            rtype: "in".into(),
        };
        assert!(matches!(encode_joint_er(&t, &e, &[r]), Err(Error::Label(_))));
    }

    #[test]
    fn dst_empty_state_lists_every_slot() {
        let slots = vec!["a b".to_string(), "c".to_string()];
        assert_eq!(
            encode_dst(&BeliefState::default(), &slots).unwrap(),
            "[ belief ] a b not given, c not given [ belief ]"
        );
        let mut bad = BeliefState::default();
        bad.assignments.insert("zzz".into(), "x".into());
        assert!(encode_dst(&bad, &slots).is_err());
    }

    #[test]
    fn srl_without_arguments() {
        let t = toks("he ran home");
        let (input, target) = encode_srl(&t, Span::new(1, 2), &[]).unwrap();
        assert_eq!(input, "he [ ran ] home");
        assert_eq!(target, "he ran home");
        assert!(encode_srl(&t, Span::new(1, 2), &[SrlArg::new(0, 2, "A0")]).is_err());
    }
}
