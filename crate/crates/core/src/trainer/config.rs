use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augcodec::Task;
use crate::error::{Error, Result};
use crate::masking::AdamConfig;

use super::algorithm::{LoopConfig, Method, Ranking};

fn default_k() -> f64 {
    1.0
}
fn default_m() -> usize {
    100
}
fn default_n() -> usize {
    15
}
fn default_lr() -> f64 {
    5e-4
}
fn default_batch() -> usize {
    8
}
fn default_min_count() -> usize {
    2
}
fn default_true() -> bool {
    true
}

/// Transformer dimensions; the vocabulary comes from the corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelShape {
    pub d_model: usize,
    pub n_heads: usize,
    pub n_enc_layers: usize,
    pub n_dec_layers: usize,
    pub d_ff: usize,
}

impl Default for ModelShape {
    fn default() -> Self {
        Self {
            d_model: 64,
            n_heads: 2,
            n_enc_layers: 2,
            n_dec_layers: 2,
            d_ff: 128,
        }
    }
}

/// Corpus files; relative paths resolve against the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusPaths {
    pub train: PathBuf,
    #[serde(default)]
    pub dev: Option<PathBuf>,
    pub test: PathBuf,
    /// Label schema; inferred from the corpus when absent.
    #[serde(default)]
    pub schema: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: Task,
    pub method: Method,
    #[serde(default = "default_k")]
    pub k_percent: f64,
    #[serde(default = "default_m")]
    pub m_steps: usize,
    #[serde(default = "default_n")]
    pub n_regressing: usize,
    /// Defaults to `min(1024, |train|)`.
    #[serde(default)]
    pub fisher_init_samples: Option<usize>,
    #[serde(default = "default_lr")]
    pub lr: f64,
    pub total_steps: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub ranking: Ranking,
    #[serde(default)]
    pub model: ModelShape,
    #[serde(default)]
    pub corpus: Option<CorpusPaths>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Longest generation at evaluation; defaults to the longest training
    /// target plus a margin.
    #[serde(default)]
    pub max_decode_len: Option<usize>,
    /// Training-set occurrences a source token needs to get its own id.
    #[serde(default = "default_min_count")]
    pub min_token_count: usize,
    /// Evaluate on dev at recalibration points and test the best checkpoint.
    #[serde(default = "default_true")]
    pub select_on_dev: bool,
}

impl ExperimentConfig {
    pub fn new(task: Task, method: Method, total_steps: usize, seed: u64) -> Self {
        Self {
            task,
            method,
            k_percent: default_k(),
            m_steps: default_m(),
            n_regressing: default_n(),
            fisher_init_samples: None,
            lr: default_lr(),
            total_steps,
            batch_size: default_batch(),
            seed,
            ranking: Ranking::FullSet,
            model: ModelShape::default(),
            corpus: None,
            output_dir: None,
            max_decode_len: None,
            min_token_count: default_min_count(),
            select_on_dev: true,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: Self =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(c) = cfg.corpus.as_mut() {
            let fix = |p: &mut PathBuf| {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            };
            fix(&mut c.train);
            fix(&mut c.test);
            if let Some(d) = c.dev.as_mut() {
                fix(d);
            }
            if let Some(s) = c.schema.as_mut() {
                fix(s);
            }
        }
        if let Some(out) = cfg.output_dir.as_mut() {
            if out.is_relative() {
                *out = base.join(&*out);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_percent > 0.0 && self.k_percent <= 100.0) {
            return Err(Error::Config(format!(
                "k_percent must lie in (0, 100], got {}",
                self.k_percent
            )));
        }
        if self.min_token_count == 0 {
            return Err(Error::Config("min_token_count must be positive".into()));
        }
        if self.fisher_init_samples == Some(0) {
            return Err(Error::Config("fisher_init_samples must be positive".into()));
        }
        self.loop_config(1).validate(1)
    }

    pub fn loop_config(&self, n_train: usize) -> LoopConfig {
        LoopConfig {
            method: self.method,
            k_percent: self.k_percent,
            m_steps: self.m_steps,
            n_regressing: self.n_regressing,
            fisher_init_samples: self.fisher_init_samples.unwrap_or(n_train.min(1024)),
            total_steps: self.total_steps,
            batch_size: self.batch_size,
            seed: self.seed,
            ranking: self.ranking,
            adam: AdamConfig::with_lr(self.lr),
            record_params: false,
        }
    }
}
