//! Fisher-information importance scores, top-k parameter masks and the
//! masked Adam update.

mod fisher;
mod mask;
mod optimizer;

pub use fisher::{dynamic_fisher, empirical_fisher, select_regressing, sweep_regressing, FisherScores, RegressingSweep};
pub use mask::{build_mask, mask_size, SparsityMask};
pub use optimizer::{masked_update, AdamConfig, OptimizerState};
