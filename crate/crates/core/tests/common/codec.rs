//! Seeded random label instances for codec round-trip and fuzz tests.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use fishdip::augcodec::{BeliefState, EntitySpan, ReInstance, Relation, Span, SrlArg, StructuredLabel, Task, TaskSchema};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

pub const ENTITY_TYPES: [&str; 4] = ["per", "loc", "org", "misc"];
pub const RELATION_TYPES: [&str; 3] = ["lives in", "works for", "located in or next to"];
pub const ROLES: [&str; 6] = ["A0", "A1", "A2", "AM-LOC", "AM-TMP", "R-A0"];
pub const SLOTS: [&str; 6] = [
    "hotel area",
    "hotel book day",
    "hotel book people",
    "hotel price range",
    "train leave at",
    "parking",
];
const VALUES: [&str; 8] = ["north", "south", "cheap", "friday", "two", "yes", "no", "twelve fifteen"];

pub fn schema(task: Task) -> TaskSchema {
    let s = TaskSchema::new(task);
    match task {
        Task::Ner => s.with_entity_types(ENTITY_TYPES),
        Task::JointEr => s.with_entity_types(ENTITY_TYPES).with_relation_types(RELATION_TYPES),
        Task::Re => s.with_relation_types(RELATION_TYPES),
        Task::Srl => s.with_roles(ROLES),
        Task::Dst => s.with_slots(SLOTS),
    }
}

/// A random sentence of distinct tokens. Some tokens carry punctuation and
/// mixed case so the codec sees more than plain words.
pub fn sentence(rng: &mut ChaCha8Rng, len: usize) -> Vec<String> {
    let mut pool: Vec<String> = (0..60).map(|i| format!("w{i}")).collect();
    pool.extend(["Paris", "O'Neil", "x-ray", "3.5", "U.S.", ",", ".", "(", ")"].map(String::from));
    pool.shuffle(rng);
    pool.truncate(len);
    pool
}

/// Non-overlapping random spans in `0..n`, skipping `avoid`.
pub fn spans(rng: &mut ChaCha8Rng, n: usize, avoid: Option<Span>) -> Vec<Span> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        if avoid.is_some_and(|a| i >= a.start && i < a.end) {
            i += 1;
            continue;
        }
        if rng.random_bool(0.3) {
            let mut end = (i + rng.random_range(1..=3)).min(n);
            if let Some(a) = avoid {
                if i < a.start {
                    end = end.min(a.start);
                }
            }
            out.push(Span::new(i, end));
            i = end;
        } else {
            i += 1;
        }
    }
    out
}

/// Input tokens, optional predicate and labels for one random instance.
pub fn instance(task: Task, rng: &mut ChaCha8Rng) -> (Vec<String>, Option<Span>, Vec<StructuredLabel>) {
    let n = rng.random_range(1..16);
    let tokens = sentence(rng, n);
    match task {
        Task::Ner => {
            let labels = spans(rng, n, None)
                .into_iter()
                .map(|s| StructuredLabel::Entity(EntitySpan::new(s.start, s.end, *ENTITY_TYPES.choose(rng).unwrap())))
                .collect();
            (tokens, None, labels)
        }
        Task::JointEr => {
            let ents: Vec<EntitySpan> = spans(rng, n, None)
                .into_iter()
                .map(|s| EntitySpan::new(s.start, s.end, *ENTITY_TYPES.choose(rng).unwrap()))
                .collect();
            let mut labels: Vec<StructuredLabel> = ents.iter().cloned().map(StructuredLabel::Entity).collect();
            if ents.len() >= 2 {
                for _ in 0..rng.random_range(0..4) {
                    let h = rng.random_range(0..ents.len());
                    let t = (h + rng.random_range(1..ents.len())) % ents.len();
                    labels.push(StructuredLabel::Relation(Relation {
                        head: ents[h].clone(),
                        tail: ents[t].clone(),
                        rtype: RELATION_TYPES.choose(rng).unwrap().to_string(),
                    }));
                }
            }
            (tokens, None, labels)
        }
        Task::Re => {
            let pick = |rng: &mut ChaCha8Rng| {
                let s = rng.random_range(0..n);
                Span::new(s, rng.random_range(s + 1..=n.min(s + 3)))
            };
            let head = pick(rng);
            let tail = pick(rng);
            let rtype = RELATION_TYPES.choose(rng).unwrap().to_string();
            (tokens, None, vec![StructuredLabel::ReInstance(ReInstance { head, tail, rtype })])
        }
        Task::Srl => {
            let p = rng.random_range(0..n);
            let pred = Span::new(p, p + 1);
            let labels = spans(rng, n, Some(pred))
                .into_iter()
                .map(|s| StructuredLabel::SrlArg(SrlArg::new(s.start, s.end, *ROLES.choose(rng).unwrap())))
                .collect();
            (tokens, Some(pred), labels)
        }
        Task::Dst => {
            let mut assignments = BTreeMap::new();
            for s in SLOTS {
                if rng.random_bool(0.5) {
                    assignments.insert(s.to_string(), VALUES.choose(rng).unwrap().to_string());
                }
            }
            (tokens, None, vec![StructuredLabel::Belief(BeliefState { assignments })])
        }
    }
}

pub const ALL_TASKS: [Task; 5] = [Task::Ner, Task::Re, Task::JointEr, Task::Dst, Task::Srl];

/// A whitespace-joined string of random tokens biased towards structure.
pub fn fuzz_string(rng: &mut ChaCha8Rng, input: &[String]) -> String {
    const POOL: [&str; 16] = [
        "[", "]", "|", "=", "per", "loc", "A0", "lives", "in", "belief", "hotel", "area", ",", "not", "given", "ü",
    ];
    let len = rng.random_range(0..30);
    (0..len)
        .map(|_| match rng.random_range(0..4) {
            0 if !input.is_empty() => input.choose(rng).unwrap().clone(),
            1 => {
                let n = rng.random_range(1..6);
                (0..n).map(|_| rng.random_range(33u8..127) as char).collect()
            }
            _ => POOL.choose(rng).unwrap().to_string(),
        })
        .collect::<Vec<_>>()
        .join(if rng.random_bool(0.9) { " " } else { "  " })
}

/// Checks that decoded labels satisfy the label invariants for `schema`.
pub fn assert_well_formed(labels: &[StructuredLabel], n_tokens: usize, schema: &TaskSchema) {
    let mut entity_spans: Vec<Span> = Vec::new();
    let check = |s: Span| assert!(s.start < s.end && s.end <= n_tokens, "bad span {s:?} over {n_tokens}");
    for l in labels {
        match l {
            StructuredLabel::Entity(e) => {
                check(e.span());
                assert!(schema.entity_types.contains(&e.etype));
                entity_spans.push(e.span());
            }
            StructuredLabel::Relation(r) => {
                check(r.head.span());
                check(r.tail.span());
                assert!(schema.relation_types.contains(&r.rtype));
                assert!(labels.contains(&StructuredLabel::Entity(r.head.clone())));
                assert!(labels.contains(&StructuredLabel::Entity(r.tail.clone())));
            }
            StructuredLabel::SrlArg(a) => {
                check(a.span());
                assert!(schema.role_labels.contains(&a.role));
                entity_spans.push(a.span());
            }
            StructuredLabel::ReInstance(r) => {
                check(r.head);
                check(r.tail);
                assert!(schema.relation_types.contains(&r.rtype));
            }
            StructuredLabel::Belief(b) => {
                let keys: Vec<&String> = b.assignments.keys().collect();
                let mut want: Vec<&String> = schema.slot_names.iter().collect();
                want.sort();
                assert_eq!(keys, want);
            }
        }
    }
    entity_spans.sort();
    for w in entity_spans.windows(2) {
        assert!(!w[0].overlaps(&w[1]), "overlap {:?} {:?}", w[0], w[1]);
    }
}

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

#[derive(Deserialize)]
pub struct Golden {
    pub schema: TaskSchema,
    pub input_tokens: Vec<String>,
    #[serde(default)]
    pub predicate: Option<Span>,
    pub labels: Vec<StructuredLabel>,
}

pub fn load_golden(name: &str) -> (Golden, String) {
    let dir = golden_dir();
    let g: Golden = serde_json::from_str(&fs::read_to_string(dir.join(format!("{name}.json"))).unwrap()).unwrap();
    let expected = fs::read_to_string(dir.join(format!("{name}.txt"))).unwrap();
    (g, expected.trim_end_matches('\n').to_string())
}
