//! Configuration, training, evaluation, experiments and the command line.

mod checkpoint;
pub mod cli;
mod config;
mod evaluate;
mod stats;
mod train;

pub use checkpoint::Checkpoint;
pub use config::RunConfig;
pub use evaluate::{
    evaluate, evaluate_predictions, infer, permutation_experiment, predict, to_predictions, Method, PermutationReport,
};
pub use stats::{dataset_stats, SplitStats, DURATION_BINS};
pub use train::{ablation_study, ablation_variants, train, train_from, EpochLog, TrainOutcome, Trainer};
