//! End-to-end experiments with the sequence model.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use log::info;
use serde::{Deserialize, Serialize};

use crate::augcodec::{canonical_labels, decode, read_jsonl, AugmentedExample, StructuredLabel, Task, TaskSchema};
use crate::autodiff::ParamStore;
use crate::error::{Error, Result};
use crate::masking::SparsityMask;
use crate::metrics::{evaluate, MetricReport};
use crate::model::{write_checkpoint, EncodedPair, ModelConfig, Seq2Seq, Vocab};

use super::algorithm::{run_loop, Method, StepRecord, Sweep};
use super::config::ExperimentConfig;

/// Train/dev/test examples with their label schema.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub train: Vec<AugmentedExample>,
    pub dev: Vec<AugmentedExample>,
    pub test: Vec<AugmentedExample>,
    pub schema: TaskSchema,
}

/// Collects every label type that occurs in `examples`.
pub fn infer_schema(task: Task, examples: &[&AugmentedExample]) -> TaskSchema {
    let mut schema = TaskSchema::new(task);
    let mut slots = BTreeSet::new();
    for ex in examples {
        for l in &ex.labels {
            match l {
                StructuredLabel::Entity(e) => {
                    schema.entity_types.insert(e.etype.clone());
                }
                StructuredLabel::Relation(r) => {
                    schema.entity_types.insert(r.head.etype.clone());
                    schema.entity_types.insert(r.tail.etype.clone());
                    schema.relation_types.insert(r.rtype.clone());
                }
                StructuredLabel::SrlArg(a) => {
                    schema.role_labels.insert(a.role.clone());
                }
                StructuredLabel::ReInstance(r) => {
                    schema.relation_types.insert(r.rtype.clone());
                }
                StructuredLabel::Belief(b) => slots.extend(b.assignments.keys().cloned()),
            }
        }
    }
    schema.slot_names = slots.into_iter().collect();
    schema
}

impl Dataset {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        let paths = cfg
            .corpus
            .as_ref()
            .ok_or_else(|| Error::Config("config has no corpus section".into()))?;
        let train = read_jsonl(&paths.train)?;
        let dev = match &paths.dev {
            Some(p) => read_jsonl(p)?,
            None => Vec::new(),
        };
        let test = read_jsonl(&paths.test)?;
        let schema = match &paths.schema {
            Some(p) => serde_json::from_str(&fs::read_to_string(p)?)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
            None => {
                let all: Vec<&AugmentedExample> = train.iter().chain(&dev).chain(&test).collect();
                infer_schema(cfg.task, &all)
            }
        };
        let data = Self {
            train,
            dev,
            test,
            schema,
        };
        data.check(cfg.task)?;
        Ok(data)
    }

    pub fn check(&self, task: Task) -> Result<()> {
        if self.schema.task != Some(task) {
            return Err(Error::Config(format!("schema is not for task {}", task.as_str())));
        }
        self.schema.validate()?;
        if let Some(ex) = self.train.iter().chain(&self.dev).chain(&self.test).find(|e| e.task != task) {
            return Err(Error::Config(format!(
                "example {} is a {} example, expected {}",
                ex.id,
                ex.task.as_str(),
                task.as_str()
            )));
        }
        if self.train.is_empty() || self.test.is_empty() {
            return Err(Error::Config("train and test sets must be nonempty".into()));
        }
        Ok(())
    }

    /// Vocabulary of the training split: source tokens seen at least
    /// `min_count` times, plus target tokens that never occur in a source
    /// (label names and markers). Everything else maps to UNK.
    pub fn vocab(&self, min_count: usize) -> Vocab {
        let mut source: Vec<String> = Vec::new();
        let mut target: BTreeSet<String> = BTreeSet::new();
        for ex in &self.train {
            source.extend(ex.source_tokens());
            target.extend(ex.target_tokens());
        }
        let seen: BTreeSet<&str> = source.iter().map(String::as_str).collect();
        let labels = target.iter().map(String::as_str).filter(|t| !seen.contains(t));
        Vocab::build_min_count(source.iter().map(String::as_str), labels, min_count, OOV_PLACEHOLDERS)
    }

    /// Hash of the task and the example ids of each split.
    pub fn fingerprint(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |x: u64| {
            for b in x.to_le_bytes() {
                h = (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        for (tag, split) in [(1u64, &self.train), (2, &self.dev), (3, &self.test)] {
            feed(tag);
            for ex in split {
                feed(ex.id as u64);
            }
        }
        format!("{}-{h:016x}", self.schema.task.map_or("none", Task::as_str))
    }

    fn max_len(&self) -> usize {
        self.train
            .iter()
            .chain(&self.dev)
            .chain(&self.test)
            .map(|e| e.source_tokens().len().max(e.target_tokens().len() + 2))
            .max()
            .unwrap_or(1)
    }
}

/// Copyable placeholders for rare words; enough for every sentence of the
/// built-in corpora.
pub const OOV_PLACEHOLDERS: usize = 8;

pub fn encode_pair(vocab: &Vocab, ex: &AugmentedExample) -> EncodedPair {
    let src = vocab.encode_source(&ex.source_tokens());
    EncodedPair {
        target: vocab.encode_target_with(&ex.target_tokens(), &src.oov),
        input: src.ids,
    }
}

/// One evaluated example.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: usize,
    pub generated: String,
    pub labels: Vec<StructuredLabel>,
}

/// Greedy generation, tolerant decoding and the task metric.
pub fn evaluate_split(
    model: &Seq2Seq,
    store: &ParamStore,
    vocab: &Vocab,
    examples: &[AugmentedExample],
    schema: &TaskSchema,
    max_out: usize,
) -> Result<(MetricReport, Vec<Prediction>)> {
    let task = schema.task()?;
    let mut pairs = Vec::with_capacity(examples.len());
    let mut preds = Vec::with_capacity(examples.len());
    for ex in examples {
        let src = vocab.encode_source(&ex.source_tokens());
        let ids = model.greedy_decode(store, &src.ids, max_out)?;
        let generated = vocab.decode_with(&ids, &src.oov).join(" ");
        let labels = decode(&generated, &ex.input_tokens, schema)?;
        pairs.push((labels.clone(), canonical_labels(&ex.labels, schema)));
        preds.push(Prediction {
            id: ex.id,
            generated,
            labels,
        });
    }
    Ok((evaluate(task, &pairs)?, preds))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DevPoint {
    pub t: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskEventRecord {
    pub t: usize,
    pub popcount: usize,
    pub k_percent: f64,
    pub jaccard: Option<f64>,
}

/// The contents of `metrics.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub task: Task,
    pub method: Method,
    pub seed: u64,
    pub k_percent: f64,
    pub m_steps: usize,
    pub n_regressing: usize,
    pub lr: f64,
    pub total_steps: usize,
    pub n_params: usize,
    pub n_train: usize,
    pub split: String,
    pub dev_history: Vec<DevPoint>,
    pub selected_t: usize,
    pub test: MetricReport,
    pub final_train_loss_mean: f64,
    /// Variance of the per-example training losses after the last step.
    pub final_train_loss_variance: f64,
    pub max_updated_per_step: usize,
}

/// Everything a run produced.
#[derive(Clone, Debug)]
pub struct RunLog {
    pub summary: RunSummary,
    pub steps: Vec<StepRecord>,
    pub trajectory: Vec<Sweep>,
    pub train_ids: Vec<usize>,
    pub mask_events: Vec<MaskEventRecord>,
    pub last_mask: Option<SparsityMask>,
    pub model_config: ModelConfig,
    pub vocab: Vocab,
    pub initial_params: ParamStore,
    pub final_params: ParamStore,
    /// Parameters the test metric was computed with.
    pub selected_params: ParamStore,
    pub test_predictions: Vec<Prediction>,
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Trains a fresh model on `data` as configured.
pub fn run_experiment(cfg: &ExperimentConfig, data: &Dataset) -> Result<RunLog> {
    cfg.validate()?;
    data.check(cfg.task)?;
    let vocab = data.vocab(cfg.min_token_count);
    let shape = &cfg.model;
    let model_config = ModelConfig {
        vocab_size: vocab.len(),
        d_model: shape.d_model,
        n_heads: shape.n_heads,
        n_enc_layers: shape.n_enc_layers,
        n_dec_layers: shape.n_dec_layers,
        d_ff: shape.d_ff,
        max_len: data.max_len() + 16,
        seed: crate::rng::derive_seed(cfg.seed, "init"),
    };
    let (model, mut store) = Seq2Seq::build(model_config.clone())?;
    let initial_params = store.clone();
    let pairs: Vec<EncodedPair> = data.train.iter().map(|e| encode_pair(&vocab, e)).collect();
    let refs: Vec<&EncodedPair> = pairs.iter().collect();
    let longest_target = data.train.iter().map(|e| e.target_tokens().len()).max().unwrap_or(0);
    let max_out = cfg
        .max_decode_len
        .unwrap_or(longest_target + 8)
        .min(model_config.max_len - 1);
    info!(
        "{} {} seed {}: {} parameters, {} training examples",
        cfg.task.as_str(),
        cfg.method.as_str(),
        cfg.seed,
        store.len(),
        pairs.len()
    );

    let mut dev_history = Vec::new();
    let mut best: Option<(f64, usize, ParamStore)> = None;
    let use_dev = cfg.select_on_dev && !data.dev.is_empty();
    let loop_cfg = cfg.loop_config(pairs.len());
    let trace = run_loop(&model, &mut store, &refs, &loop_cfg, |t, s| {
        if !use_dev {
            return Ok(());
        }
        let (report, _) = evaluate_split(&model, s, &vocab, &data.dev, &data.schema, max_out)?;
        info!("t={t}: dev {} {:.4}", report.metric, report.value);
        dev_history.push(DevPoint { t, value: report.value });
        if best.as_ref().is_none_or(|(v, _, _)| report.value >= *v) {
            best = Some((report.value, t, s.clone()));
        }
        Ok(())
    })?;
    let (selected_t, selected_params) = match best {
        Some((_, t, p)) => (t, p),
        None => (cfg.total_steps, store.clone()),
    };
    let (test, test_predictions) =
        evaluate_split(&model, &selected_params, &vocab, &data.test, &data.schema, max_out)?;
    info!("test {} {:.4} (checkpoint t={selected_t})", test.metric, test.value);
    let final_losses = &trace.sweeps.last().expect("at least one sweep").losses;
    let (final_train_loss_mean, final_train_loss_variance) = mean_var(final_losses);
    let summary = RunSummary {
        task: cfg.task,
        method: cfg.method,
        seed: cfg.seed,
        k_percent: cfg.k_percent,
        m_steps: cfg.m_steps,
        n_regressing: cfg.n_regressing,
        lr: cfg.lr,
        total_steps: cfg.total_steps,
        n_params: store.len(),
        n_train: pairs.len(),
        split: data.fingerprint(),
        dev_history,
        selected_t,
        test,
        final_train_loss_mean,
        final_train_loss_variance,
        max_updated_per_step: trace.steps.iter().map(|s| s.updated).max().unwrap_or(0),
    };
    let mask_events = trace
        .mask_events
        .iter()
        .map(|e| MaskEventRecord {
            t: e.t,
            popcount: e.mask.popcount(),
            k_percent: e.mask.k_percent(),
            jaccard: e.jaccard,
        })
        .collect();
    Ok(RunLog {
        summary,
        steps: trace.steps,
        trajectory: trace.sweeps,
        train_ids: data.train.iter().map(|e| e.id).collect(),
        mask_events,
        last_mask: trace.mask_events.last().map(|e| e.mask.clone()),
        model_config,
        vocab,
        initial_params,
        final_params: store,
        selected_params,
        test_predictions,
    })
}

fn write_json_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for it in items {
        serde_json::to_writer(&mut w, it)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

impl RunLog {
    /// Writes `steps.jsonl`, `trajectory.csv`, `mask_events.jsonl`,
    /// `metrics.json`, `predictions.jsonl` and `checkpoint.bin` (plus
    /// `mask.bin` when a mask was built).
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_json_lines(&dir.join("steps.jsonl"), &self.steps)?;
        write_json_lines(&dir.join("mask_events.jsonl"), &self.mask_events)?;
        write_json_lines(&dir.join("predictions.jsonl"), &self.test_predictions)?;
        let mut csv = BufWriter::new(File::create(dir.join("trajectory.csv"))?);
        write!(csv, "t")?;
        for id in &self.train_ids {
            write!(csv, ",ex{id}")?;
        }
        writeln!(csv)?;
        for s in &self.trajectory {
            write!(csv, "{}", s.t)?;
            for l in &s.losses {
                write!(csv, ",{l}")?;
            }
            writeln!(csv)?;
        }
        csv.flush()?;
        let mut metrics = serde_json::to_string_pretty(&self.summary)?;
        metrics.push('\n');
        fs::write(dir.join("metrics.json"), metrics)?;
        write_checkpoint(
            &dir.join("checkpoint.bin"),
            &self.model_config,
            &self.vocab,
            &self.selected_params,
        )?;
        if let Some(m) = &self.last_mask {
            m.write(&dir.join("mask.bin"))?;
        }
        Ok(())
    }
}

/// Loads the corpus named by `cfg`, trains, and writes the run directory if
/// one is configured.
pub fn run(cfg: &ExperimentConfig) -> Result<RunLog> {
    let data = Dataset::load(cfg)?;
    let log = run_experiment(cfg, &data)?;
    if let Some(dir) = &cfg.output_dir {
        log.write(dir)?;
    }
    Ok(log)
}
