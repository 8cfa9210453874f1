//! Evaluation protocol: splitting, balancing, grid search, repeated seeded
//! runs and report rendering.

mod benchmark;
mod config;
mod model;
mod split;

pub use benchmark::{benchmark, dataset_fingerprint, BenchmarkReport, GridPoint, ModelRow, RunRecord};
pub use config::{BenchmarkConfig, DataSource, LmSection, MarkovSection, NeuralGrid, VgSection};
pub use model::{evaluate, run_training, Hyperparams, ModelKind, TrainedModel, TrainedRun};
pub use split::{balance, split, BalanceStrategy, SplitSpec};
