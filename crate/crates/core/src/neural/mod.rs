//! Minimal double-precision neural toolkit shared by the two LSTM models.
//!
//! Inputs are one-hot token indices, so the input half of every LSTM weight
//! matrix is applied by column lookup rather than a dense product.

mod adam;
mod batch;
mod checkpoint;
mod config;
mod early_stop;
mod gradcheck;
mod loss;
mod lstm;
mod params;

pub use adam::{clip_grad_norm, AdamConfig, AdamState};
pub use batch::{batch_plan, PaddedBatch, PAD};
pub use checkpoint::{Checkpoint, Tensor};
pub use config::NeuralTrainConfig;
pub use early_stop::{run_early_stopping, EarlyStopping, EpochRecord, StopReason, TrainingCurve};
pub use gradcheck::{grad_check, GradCheckReport};
pub use loss::{sigmoid, sigmoid_bce, softmax, softmax_cross_entropy};
pub use lstm::{lstm_backward, lstm_forward, LstmOutput, LstmTrace};
pub use params::{DenseParams, Gate, LstmParams, Parameterized};
