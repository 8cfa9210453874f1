use super::early_stop::EarlyStopping;

/// Hyperparameters shared by both LSTM trainers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuralTrainConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub early_stopping: EarlyStopping,
    pub clip_norm: Option<f64>,
}

impl Default for NeuralTrainConfig {
    fn default() -> Self {
        Self {
            hidden: 20,
            learning_rate: 0.01,
            batch_size: 20,
            seed: 0,
            early_stopping: EarlyStopping::default(),
            clip_norm: None,
        }
    }
}
