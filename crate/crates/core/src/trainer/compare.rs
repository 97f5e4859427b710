//! Aggregation of finished runs across seeds and methods.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::augcodec::Task;
use crate::error::{Error, Result};

use super::algorithm::Method;
use super::run::RunSummary;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodStats {
    pub method: Method,
    pub n_runs: usize,
    pub seeds: Vec<u64>,
    pub metric: String,
    pub mean: f64,
    /// Sample standard deviation; `None` with a single run.
    pub std: Option<f64>,
    /// Mean over seeds of the final per-example train loss variance.
    pub mean_loss_variance: f64,
}

/// How often one method ended with a smoother training-loss distribution
/// than another on the same seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessWins {
    pub method: Method,
    pub against: Method,
    pub wins: usize,
    pub paired_seeds: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub task: Task,
    pub split: String,
    pub methods: Vec<MethodStats>,
    pub smoothness: Vec<SmoothnessWins>,
}

pub fn mean_std(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.len() > 1)
        .then(|| (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt());
    (mean, std)
}

/// Groups runs by method. All runs must share a task and a data split.
pub fn compare(runs: &[RunSummary]) -> Result<Comparison> {
    let first = runs
        .first()
        .ok_or_else(|| Error::Config("nothing to compare".into()))?;
    for r in runs {
        if r.task != first.task {
            return Err(Error::Config(format!(
                "runs mix tasks {} and {}",
                first.task.as_str(),
                r.task.as_str()
            )));
        }
        if r.split != first.split {
            return Err(Error::Config(format!(
                "runs use different data splits ({} vs {})",
                first.split, r.split
            )));
        }
    }
    let mut by_method: BTreeMap<&str, Vec<&RunSummary>> = BTreeMap::new();
    for r in runs {
        by_method.entry(r.method.as_str()).or_default().push(r);
    }
    let mut methods = Vec::new();
    for group in by_method.values() {
        let values: Vec<f64> = group.iter().map(|r| r.test.value).collect();
        let variances: Vec<f64> = group.iter().map(|r| r.final_train_loss_variance).collect();
        let (mean, std) = mean_std(&values);
        methods.push(MethodStats {
            method: group[0].method,
            n_runs: group.len(),
            seeds: group.iter().map(|r| r.seed).collect(),
            metric: group[0].test.metric.clone(),
            mean,
            std,
            mean_loss_variance: mean_std(&variances).0,
        });
    }
    let mut smoothness = Vec::new();
    for a in by_method.values() {
        for b in by_method.values() {
            if a[0].method == b[0].method {
                continue;
            }
            let mut wins = 0;
            let mut paired = 0;
            for ra in a {
                if let Some(rb) = b.iter().find(|r| r.seed == ra.seed) {
                    paired += 1;
                    if ra.final_train_loss_variance < rb.final_train_loss_variance {
                        wins += 1;
                    }
                }
            }
            smoothness.push(SmoothnessWins {
                method: a[0].method,
                against: b[0].method,
                wins,
                paired_seeds: paired,
            });
        }
    }
    Ok(Comparison {
        task: first.task,
        split: first.split.clone(),
        methods,
        smoothness,
    })
}
