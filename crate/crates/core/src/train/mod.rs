//! Mini-batch training, checkpoints, multi-trial runs and per-key predictions.

mod checkpoint;
mod config;
mod optim;
mod result;
mod trainer;

pub use checkpoint::{load_checkpoint, load_checkpoint_for, save_checkpoint, Checkpoint, CKPT_MAGIC, CKPT_VERSION};
pub use config::{EarlyStop, OptimizerConfig, TrainConfig};
pub use optim::Optimizer;
pub use result::{predictions_csv, summarize, top1, trials_csv, Counters, EpochStats, Prediction, TrialResult, TrialSummary};
pub use trainer::{
    check_checkpoint_set, evaluate, probabilities, run_trials, train, train_as, TrainOutcome, EVAL_BATCH, GRAD_CHUNK,
};
