//! Discriminative sequence-to-label LSTM: one LSTM layer, pooled to a single
//! vector, a `hidden x 1` dense head and a sigmoid giving `P(BUY | s)`.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::classify::{accuracy, Classifier};
use crate::error::{Error, Result};
use crate::markov::symbol_indices;
use crate::neural::{
    batch_plan, clip_grad_norm, lstm_backward, lstm_forward, run_early_stopping, sigmoid,
    sigmoid_bce, AdamConfig, AdamState, Checkpoint, DenseParams, LstmParams, NeuralTrainConfig,
    PaddedBatch, Parameterized, TrainingCurve,
};
use crate::session::{Dataset, EventCategory, Label, NUM_SYMBOLS};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pooling {
    /// Hidden state at the last unmasked step.
    Last,
    /// Mean hidden state over unmasked steps.
    Avg,
}

impl Pooling {
    pub fn name(self) -> &'static str {
        match self {
            Pooling::Last => "last",
            Pooling::Avg => "avg",
        }
    }
}

impl fmt::Display for Pooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Pooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "last" => Ok(Pooling::Last),
            "avg" => Ok(Pooling::Avg),
            other => Err(Error::Config(format!("unknown pooling `{other}`"))),
        }
    }
}

/// Pools a `max_len x hidden` state matrix using its mask.
pub fn pool(hidden: &[f64], mask: &[u8], hidden_dim: usize, mode: Pooling) -> Result<Vec<f64>> {
    if hidden.len() != mask.len() * hidden_dim {
        return Err(Error::Shape("hidden states and mask disagree".into()));
    }
    let real: Vec<usize> = (0..mask.len()).filter(|&t| mask[t] != 0).collect();
    let Some(&last) = real.last() else {
        return Err(Error::Input("cannot pool a fully masked sequence".into()));
    };
    let state = |t: usize| &hidden[t * hidden_dim..(t + 1) * hidden_dim];
    Ok(match mode {
        Pooling::Last => state(last).to_vec(),
        Pooling::Avg => {
            let mut sum = vec![0.0; hidden_dim];
            for &t in &real {
                for (s, v) in sum.iter_mut().zip(state(t)) {
                    *s += v;
                }
            }
            let n = real.len() as f64;
            sum.into_iter().map(|s| s / n).collect()
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct S2lModel {
    pub lstm: LstmParams,
    pub head: DenseParams,
    pooling: Pooling,
    pub threshold: f64,
}

impl S2lModel {
    pub fn zeros(hidden: usize, pooling: Pooling) -> Self {
        Self {
            lstm: LstmParams::zeros(NUM_SYMBOLS, hidden),
            head: DenseParams::zeros(hidden, 1),
            pooling,
            threshold: DEFAULT_THRESHOLD,
        }
    }

    pub fn init(hidden: usize, pooling: Pooling, rng: &mut ChaCha8Rng) -> Self {
        Self {
            lstm: LstmParams::init(NUM_SYMBOLS, hidden, rng),
            head: DenseParams::init(hidden, 1, rng),
            pooling,
            threshold: DEFAULT_THRESHOLD,
        }
    }

    pub fn pooling(&self) -> Pooling {
        self.pooling
    }

    pub fn hidden_dim(&self) -> usize {
        self.lstm.hidden_dim
    }

    fn check(&self) -> Result<()> {
        self.lstm.check_shapes()?;
        self.head.check_shapes()?;
        if self.head.output_dim != 1 || self.head.input_dim != self.lstm.hidden_dim {
            return Err(Error::Shape("head must map hidden -> 1".into()));
        }
        Ok(())
    }

    /// Pre-sigmoid scores for every row of a batch.
    pub fn logits(&self, batch: &PaddedBatch) -> Result<Vec<f64>> {
        self.check()?;
        let out = lstm_forward(&self.lstm, batch)?;
        let dense = out.hidden_tensor();
        let h = self.hidden_dim();
        let stride = batch.max_len * h;
        (0..batch.batch_size())
            .map(|b| {
                let pooled = pool(
                    &dense[b * stride..(b + 1) * stride],
                    batch.mask_row(b),
                    h,
                    self.pooling,
                )?;
                let mut z = [0.0];
                self.head.forward(&pooled, &mut z);
                Ok(z[0])
            })
            .collect()
    }

    pub fn predict_proba_indices(&self, seq: &[usize]) -> Result<f64> {
        let batch = PaddedBatch::from_sequences(&[seq])?;
        Ok(sigmoid(self.logits(&batch)?[0]))
    }

    /// `P(BUY | s)`.
    pub fn predict_proba(&self, symbols: &[EventCategory]) -> Result<f64> {
        if symbols.is_empty() {
            return Err(Error::Input("cannot score an empty session".into()));
        }
        self.predict_proba_indices(&symbol_indices(symbols)?)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ckpt = Checkpoint::new("s2l");
        ckpt.set_meta("pooling", self.pooling);
        ckpt.set_meta("threshold", self.threshold);
        ckpt.push_lstm("lstm", &self.lstm);
        ckpt.push_dense("head", &self.head);
        ckpt
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        if ckpt.kind != "s2l" {
            return Err(Error::Checkpoint(format!("expected s2l, found `{}`", ckpt.kind)));
        }
        let model = Self {
            lstm: ckpt.lstm("lstm")?,
            head: ckpt.dense("head")?,
            pooling: ckpt.meta("pooling")?.parse()?,
            threshold: ckpt.meta_parsed("threshold")?,
        };
        model.check().map_err(|e| Error::Checkpoint(e.to_string()))?;
        Ok(model)
    }
}

/// BUY iff the probability is strictly above the threshold.
pub fn decide(probability: f64, threshold: f64) -> Label {
    if probability > threshold {
        Label::Buy
    } else {
        Label::NoBuy
    }
}

impl Classifier for S2lModel {
    fn predict(&self, symbols: &[EventCategory]) -> Result<Label> {
        Ok(decide(self.predict_proba(symbols)?, self.threshold))
    }
}

impl Parameterized for S2lModel {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut t = self.lstm.tensors();
        t.extend(self.head.tensors());
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = self.lstm.tensors_mut();
        t.extend(self.head.tensors_mut());
        t
    }
}

/// Mean binary cross-entropy over a batch and its gradient multiplied by `scale`.
pub fn s2l_loss_and_grad(
    model: &S2lModel,
    batch: &PaddedBatch,
    labels: &[bool],
    scale: f64,
) -> Result<(f64, S2lModel)> {
    model.check()?;
    if labels.len() != batch.batch_size() || labels.is_empty() {
        return Err(Error::Shape("one label per batch row required".into()));
    }
    let out = lstm_forward(&model.lstm, batch)?;
    let h = model.hidden_dim();
    let norm = 1.0 / labels.len() as f64;
    let mut grads = model.zeros_like();
    let mut d_hidden = Vec::with_capacity(labels.len());
    let mut loss = 0.0;
    for (trace, &y) in out.traces.iter().zip(labels) {
        let len = trace.len();
        if len == 0 {
            return Err(Error::Input("cannot pool a fully masked sequence".into()));
        }
        let pooled: Vec<f64> = match model.pooling {
            Pooling::Last => trace.hidden_at(len - 1).to_vec(),
            Pooling::Avg => {
                let mut sum = vec![0.0; h];
                for t in 0..len {
                    for (s, v) in sum.iter_mut().zip(trace.hidden_at(t)) {
                        *s += v;
                    }
                }
                sum.into_iter().map(|s| s / len as f64).collect()
            }
        };
        let mut z = [0.0];
        model.head.forward(&pooled, &mut z);
        let (l, dz) = sigmoid_bce(z[0], y);
        loss += l;
        let mut d_pooled = vec![0.0; h];
        model
            .head
            .backward(&pooled, &[dz * norm * scale], &mut grads.head, &mut d_pooled);
        let mut dh = vec![0.0; len * h];
        match model.pooling {
            Pooling::Last => dh[(len - 1) * h..].copy_from_slice(&d_pooled),
            Pooling::Avg => {
                let inv = 1.0 / len as f64;
                for t in 0..len {
                    for j in 0..h {
                        dh[t * h + j] = d_pooled[j] * inv;
                    }
                }
            }
        }
        d_hidden.push(dh);
    }
    lstm_backward(&model.lstm, &out, &d_hidden, &mut grads.lstm)?;
    Ok((loss * norm, grads))
}

/// Trains with Adam on mean BCE, early stopping on validation accuracy.
pub fn fit_s2l(
    train: &Dataset,
    val: &Dataset,
    pooling: Pooling,
    config: NeuralTrainConfig,
) -> Result<(S2lModel, TrainingCurve)> {
    if train.count(Label::Buy) == 0 || train.count(Label::NoBuy) == 0 {
        return Err(Error::Fit("training set must contain both classes".into()));
    }
    if val.is_empty() {
        return Err(Error::Fit("empty validation set".into()));
    }
    let seqs: Vec<Vec<usize>> = train
        .iter()
        .map(|s| symbol_indices(s.symbols()))
        .collect::<Result<_>>()?;
    let labels: Vec<bool> = train.iter().map(|s| s.label().is_buy()).collect();
    let lengths: Vec<usize> = seqs.iter().map(Vec::len).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let model = S2lModel::init(config.hidden, pooling, &mut rng);
    let mut adam = AdamState::new(&model, AdamConfig::with_learning_rate(config.learning_rate));
    run_early_stopping(
        config.early_stopping,
        model,
        |m, _| {
            let plan = batch_plan(&lengths, config.batch_size, &mut rng);
            let mut total = 0.0;
            for idx in &plan {
                let rows: Vec<&[usize]> = idx.iter().map(|&i| seqs[i].as_slice()).collect();
                let ys: Vec<bool> = idx.iter().map(|&i| labels[i]).collect();
                let batch = PaddedBatch::from_sequences(&rows)?;
                let (loss, mut grads) = s2l_loss_and_grad(m, &batch, &ys, 1.0)?;
                if let Some(max) = config.clip_norm {
                    clip_grad_norm(&mut grads, max);
                }
                adam.update(m, &grads)?;
                total += loss;
            }
            Ok(total / plan.len().max(1) as f64)
        },
        |m| accuracy(m, val),
    )
}
