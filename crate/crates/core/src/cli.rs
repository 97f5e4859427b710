//! Command-line front end.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;

use crate::augcodec::{read_jsonl, write_jsonl, AugmentedExample, Task, TaskSchema};
use crate::corpus::{generate, partition, reference_ner_spec, subsample, GenSpec};
use crate::error::{Error, Result};
use crate::masking::SparsityMask;
use crate::model::{read_checkpoint, Seq2Seq};
use crate::trainer::{compare, evaluate_split, infer_schema, run, ExperimentConfig, MaskEventRecord, Method, RunSummary};

#[derive(Parser, Debug)]
#[command(name = "fishdip", version, about = "Dynamic sparse fine-tuning for sequence labeling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a corpus and write train/dev/test splits.
    Gen(GenArgs),
    /// Train one run from a config file.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a labeled file.
    Eval(EvalArgs),
    /// Aggregate finished runs.
    Compare(CompareArgs),
    /// Summarize mask churn of a run.
    MaskStats(MaskStatsArgs),
}

#[derive(Args, Debug)]
pub struct GenArgs {
    /// GenSpec JSON document.
    #[arg(long, conflicts_with = "reference", required_unless_present = "reference")]
    pub spec: Option<PathBuf>,
    /// Use the built-in NER corpus.
    #[arg(long)]
    pub reference: bool,
    /// Overrides the spec seed; also seeds the split.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fraction of the training pool to keep. Defaults to all of it, or to 64
    /// sentences for the reference corpus.
    #[arg(long)]
    pub fraction: Option<f64>,
    /// Keep exactly this many training examples instead of a fraction.
    #[arg(long, conflicts_with = "fraction")]
    pub train_size: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub method: Option<Method>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Label schema; inferred from the data when absent.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Where to write the metric report; printed when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// Run directories, each holding a metrics.json.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MaskStatsArgs {
    pub run: PathBuf,
    /// Another run whose final mask to compare against.
    #[arg(long)]
    pub against: Option<PathBuf>,
}

fn print_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

const REFERENCE_TRAIN_SIZE: usize = 64;

fn gen(args: &GenArgs) -> Result<()> {
    let mut spec: GenSpec = match &args.spec {
        Some(p) => serde_json::from_str(&fs::read_to_string(p)?)
            .map_err(|e| Error::Spec(format!("{}: {e}", p.display())))?,
        None => reference_ner_spec(0),
    };
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    let examples = generate(&spec)?;
    let full = partition(&examples, spec.seed);
    let train_size = match (args.train_size, args.fraction) {
        (None, None) if args.reference => Some(REFERENCE_TRAIN_SIZE),
        (n, _) => n,
    };
    let fraction = match train_size {
        Some(n) => n as f64 / full.train.len() as f64,
        None => args.fraction.unwrap_or(1.0),
    };
    let split = subsample(&full, fraction, spec.seed)?;
    fs::create_dir_all(&args.out)?;
    write_jsonl(&args.out.join("train.jsonl"), &split.train)?;
    write_jsonl(&args.out.join("dev.jsonl"), &split.dev)?;
    write_jsonl(&args.out.join("test.jsonl"), &split.test)?;
    print_json(&spec.schema(), Some(&args.out.join("schema.json")))?;
    println!(
        "wrote {} train, {} dev, {} test examples to {}",
        split.train.len(),
        split.dev.len(),
        split.test.len(),
        args.out.display()
    );
    Ok(())
}

fn train(args: &TrainArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::from_file(&args.config)?;
    if let Some(m) = args.method {
        cfg.method = m;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(k) = args.k {
        cfg.k_percent = k;
    }
    if let Some(m) = args.m {
        cfg.m_steps = m;
    }
    if let Some(n) = args.n {
        cfg.n_regressing = n;
    }
    if let Some(lr) = args.lr {
        cfg.lr = lr;
    }
    if let Some(t) = args.steps {
        cfg.total_steps = t;
    }
    if let Some(b) = args.batch_size {
        cfg.batch_size = b;
    }
    if let Some(o) = &args.out {
        cfg.output_dir = Some(o.clone());
    }
    cfg.validate()?;
    if cfg.output_dir.is_none() {
        return Err(Error::Config("no output directory; set output_dir or pass --out".into()));
    }
    let log = run(&cfg)?;
    let s = &log.summary;
    println!(
        "{} {} seed {}: test {} {:.4} (checkpoint t={})",
        s.task.as_str(),
        s.method.as_str(),
        s.seed,
        s.test.metric,
        s.test.value,
        s.selected_t
    );
    Ok(())
}

fn task_of(examples: &[AugmentedExample]) -> Result<Task> {
    let task = examples
        .first()
        .map(|e| e.task)
        .ok_or_else(|| Error::Config("no examples to evaluate".into()))?;
    if examples.iter().any(|e| e.task != task) {
        return Err(Error::Config("evaluation data mixes tasks".into()));
    }
    Ok(task)
}

fn eval(args: &EvalArgs) -> Result<()> {
    let ckpt = read_checkpoint(&args.checkpoint)?;
    let examples = read_jsonl(&args.data)?;
    let task = task_of(&examples)?;
    let schema: TaskSchema = match &args.schema {
        Some(p) => serde_json::from_str(&fs::read_to_string(p)?)
            .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
        None => infer_schema(task, &examples.iter().collect::<Vec<_>>()),
    };
    if schema.task != Some(task) {
        return Err(Error::Config("schema and data are for different tasks".into()));
    }
    let model = Seq2Seq::with_store(ckpt.config.clone(), &ckpt.store)?;
    let longest = examples.iter().map(|e| e.target_tokens().len()).max().unwrap_or(0);
    let max_out = (longest + 8).min(ckpt.config.max_len - 1);
    let (report, _) = evaluate_split(&model, &ckpt.store, &ckpt.vocab, &examples, &schema, max_out)?;
    print_json(&report, args.out.as_deref())
}

fn read_summary(dir: &Path) -> Result<RunSummary> {
    let path = dir.join("metrics.json");
    serde_json::from_str(&fs::read_to_string(&path)?).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn compare_runs(args: &CompareArgs) -> Result<()> {
    let runs = args.runs.iter().map(|d| read_summary(d)).collect::<Result<Vec<_>>>()?;
    let report = compare(&runs)?;
    for m in &report.methods {
        let std = m.std.map_or("n/a".to_string(), |s| format!("{s:.4}"));
        info!(
            "{}: {} {:.4} ± {std} over {} runs",
            m.method.as_str(),
            m.metric,
            m.mean,
            m.n_runs
        );
    }
    print_json(&report, args.out.as_deref())
}

#[derive(Serialize)]
struct MaskStats {
    events: usize,
    popcounts: Vec<usize>,
    mean_jaccard: Option<f64>,
    min_jaccard: Option<f64>,
    final_overlap: Option<f64>,
}

fn mask_stats(args: &MaskStatsArgs) -> Result<()> {
    let text = fs::read_to_string(args.run.join("mask_events.jsonl"))?;
    let events = text
        .lines()
        .map(serde_json::from_str::<MaskEventRecord>)
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let overlaps: Vec<f64> = events.iter().filter_map(|e| e.jaccard).collect();
    let final_overlap = match &args.against {
        Some(other) => {
            let a = SparsityMask::read(&args.run.join("mask.bin"))?;
            let b = SparsityMask::read(&other.join("mask.bin"))?;
            Some(a.jaccard(&b)?)
        }
        None => None,
    };
    let stats = MaskStats {
        events: events.len(),
        popcounts: events.iter().map(|e| e.popcount).collect(),
        mean_jaccard: (!overlaps.is_empty()).then(|| overlaps.iter().sum::<f64>() / overlaps.len() as f64),
        min_jaccard: overlaps.iter().copied().reduce(f64::min),
        final_overlap,
    };
    print_json(&stats, None)
}

/// Exit status for an error: 1 for bad input or configuration, 2 for
/// failures while running.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Spec(_) => 1,
        _ => 2,
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Gen(a) => gen(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Compare(a) => compare_runs(a),
        Command::MaskStats(a) => mask_stats(a),
    }
}

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit status.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
