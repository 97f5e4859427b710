//! Training loop, experiment runner and run comparison.

mod algorithm;
mod compare;
mod config;
mod run;

pub use algorithm::{
    fisher_init_sample, run_loop, BatchSampler, LoopConfig, MaskEvent, Method, Ranking, StepRecord, Sweep, Trace,
};
pub use compare::{compare, mean_std, Comparison, MethodStats, SmoothnessWins};
pub use config::{CorpusPaths, ExperimentConfig, ModelShape};
pub use run::{
    encode_pair, evaluate_split, OOV_PLACEHOLDERS, infer_schema, run, run_experiment, Dataset, DevPoint, MaskEventRecord, Prediction,
    RunLog, RunSummary,
};
