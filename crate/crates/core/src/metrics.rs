//! Micro-averaged precision/recall/F1 and dialogue joint accuracy.

use std::collections::BTreeSet;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::augcodec::{BeliefState, EntitySpan, ReInstance, Relation, SrlArg, StructuredLabel, Task};
use crate::error::{contract, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Prf {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = ratio(2 * tp, 2 * tp + fp + fn_);
        Self {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
        }
    }

    /// Adds counts and recomputes the ratios.
    pub fn merge(&self, other: &Prf) -> Self {
        Self::from_counts(self.tp + other.tp, self.fp + other.fp, self.fn_ + other.fn_)
    }
}

/// Counts for one example; duplicates on either side are counted once.
fn count<T: Ord + Hash + Clone>(pred: &[T], gold: &[T]) -> Prf {
    let p: BTreeSet<&T> = pred.iter().collect();
    let g: BTreeSet<&T> = gold.iter().collect();
    let tp = p.intersection(&g).count();
    Prf::from_counts(tp, p.len() - tp, g.len() - tp)
}

/// Micro-aggregate over per-example prediction/gold pairs.
fn corpus<T: Ord + Hash + Clone>(pairs: &[(Vec<T>, Vec<T>)]) -> Prf {
    pairs.iter().fold(Prf::default(), |acc, (p, g)| acc.merge(&count(p, g)))
}

pub fn entity_f1(pairs: &[(Vec<EntitySpan>, Vec<EntitySpan>)]) -> Prf {
    corpus(pairs)
}

/// Strict mode matches spans, entity types and relation type; relaxed mode
/// ignores the entity types.
pub fn relation_f1(pairs: &[(Vec<Relation>, Vec<Relation>)], relaxed: bool) -> Prf {
    if !relaxed {
        return corpus(pairs);
    }
    let key = |r: &Relation| (r.head.start, r.head.end, r.tail.start, r.tail.end, r.rtype.clone());
    let keyed: Vec<_> = pairs
        .iter()
        .map(|(p, g)| (p.iter().map(key).collect(), g.iter().map(key).collect()))
        .collect();
    corpus::<(usize, usize, usize, usize, String)>(&keyed)
}

pub fn srl_f1(pairs: &[(Vec<SrlArg>, Vec<SrlArg>)]) -> Prf {
    corpus(pairs)
}

pub fn re_f1(pairs: &[(Vec<ReInstance>, Vec<ReInstance>)]) -> Prf {
    corpus(pairs)
}

/// Fraction of turns whose whole slot map matches exactly.
pub fn joint_accuracy(pred: &[BeliefState], gold: &[BeliefState]) -> Result<f64> {
    if pred.len() != gold.len() {
        return contract(format!("{} predicted states for {} gold states", pred.len(), gold.len()));
    }
    let hits = pred.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok(ratio(hits, gold.len()))
}

/// Serialised metric summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub task: Task,
    pub metric: String,
    pub value: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub n_examples: usize,
}

fn as_entity(l: &StructuredLabel) -> Option<EntitySpan> {
    match l {
        StructuredLabel::Entity(e) => Some(e.clone()),
        _ => None,
    }
}

fn as_relation(l: &StructuredLabel) -> Option<Relation> {
    match l {
        StructuredLabel::Relation(r) => Some(r.clone()),
        _ => None,
    }
}

fn as_arg(l: &StructuredLabel) -> Option<SrlArg> {
    match l {
        StructuredLabel::SrlArg(a) => Some(a.clone()),
        _ => None,
    }
}

fn as_instance(l: &StructuredLabel) -> Option<ReInstance> {
    match l {
        StructuredLabel::ReInstance(r) => Some(r.clone()),
        _ => None,
    }
}

type LabelPairs = [(Vec<StructuredLabel>, Vec<StructuredLabel>)];

fn split<T>(pairs: &LabelPairs, pick: fn(&StructuredLabel) -> Option<T>) -> Vec<(Vec<T>, Vec<T>)> {
    pairs
        .iter()
        .map(|(p, g)| (p.iter().filter_map(pick).collect(), g.iter().filter_map(pick).collect()))
        .collect()
}

/// The headline metric of `task` over (predicted, gold) label lists.
pub fn evaluate(task: Task, pairs: &LabelPairs) -> Result<MetricReport> {
    let n = pairs.len();
    let report = |metric: &str, p: Prf| MetricReport {
        task,
        metric: metric.into(),
        value: p.f1,
        tp: p.tp,
        fp: p.fp,
        fn_: p.fn_,
        n_examples: n,
    };
    Ok(match task {
        Task::Ner => report("entity_f1", entity_f1(&split(pairs, as_entity))),
        Task::JointEr => report("relation_f1", relation_f1(&split(pairs, as_relation), false)),
        Task::Srl => report("srl_f1", srl_f1(&split(pairs, as_arg))),
        Task::Re => report("re_f1", re_f1(&split(pairs, as_instance))),
        Task::Dst => {
            let state = |ls: &[StructuredLabel]| {
                ls.iter()
                    .find_map(|l| match l {
                        StructuredLabel::Belief(b) => Some(b.clone()),
                        _ => None,
                    })
                    .unwrap_or_default()
            };
            let pred: Vec<_> = pairs.iter().map(|(p, _)| state(p)).collect();
            let gold: Vec<_> = pairs.iter().map(|(_, g)| state(g)).collect();
            let acc = joint_accuracy(&pred, &gold)?;
            let hits = pred.iter().zip(&gold).filter(|(p, g)| p == g).count();
            MetricReport {
                task,
                metric: "joint_accuracy".into(),
                value: acc,
                tp: hits,
                fp: n - hits,
                fn_: n - hits,
                n_examples: n,
            }
        }
    })
}

/// Entity F1 of a joint extraction run, reported next to relation F1.
pub fn joint_entity_report(pairs: &LabelPairs) -> Result<MetricReport> {
    let mut r = evaluate(Task::Ner, pairs)?;
    r.task = Task::JointEr;
    Ok(r)
}
