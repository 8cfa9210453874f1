//! Per-class LSTM next-token language models combined into a mixture classifier.
//!
//! Each model reads the SOS-prefixed session and predicts the next symbol at
//! every step, ending with an EOS prediction. Including the EOS factor makes
//! the sequence score a proper log-probability over finite strings.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::classify::{accuracy, Mixture, PriorMode, Priors, SequenceScorer};
use crate::error::{Error, Result};
use crate::markov::symbol_indices;
use crate::neural::{
    batch_plan, clip_grad_norm, lstm_backward, lstm_forward, run_early_stopping,
    softmax_cross_entropy, AdamConfig, AdamState, Checkpoint, DenseParams,
    LstmParams, NeuralTrainConfig, PaddedBatch, Parameterized, TrainingCurve,
};
use crate::session::{Dataset, EventCategory, Label, NUM_SYMBOLS};

/// Hidden sizes searched by default.
pub const HIDDEN_GRID: [usize; 4] = [10, 20, 40, 80];
pub const LEARNING_RATE_GRID: [f64; 2] = [0.01, 0.001];
pub const BATCH_SIZE_GRID: [usize; 3] = [10, 20, 50];

#[derive(Debug, Clone, PartialEq)]
pub struct LmModel {
    pub lstm: LstmParams,
    /// Hidden state to logits over the symbols plus EOS.
    pub projection: DenseParams,
}

pub type LmMixture = Mixture<LmModel>;

impl LmModel {
    pub fn zeros(num_symbols: usize, hidden: usize) -> Self {
        Self {
            lstm: LstmParams::zeros(num_symbols + 1, hidden),
            projection: DenseParams::zeros(hidden, num_symbols + 1),
        }
    }

    pub fn init(num_symbols: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            lstm: LstmParams::init(num_symbols + 1, hidden, rng),
            projection: DenseParams::init(hidden, num_symbols + 1, rng),
        }
    }

    pub fn num_symbols(&self) -> usize {
        self.lstm.input_dim - 1
    }

    /// Input token for start-of-sequence.
    pub fn sos(&self) -> usize {
        self.num_symbols()
    }

    /// Output class for end-of-sequence.
    pub fn eos(&self) -> usize {
        self.num_symbols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.lstm.hidden_dim
    }

    fn check(&self) -> Result<()> {
        self.lstm.check_shapes()?;
        self.projection.check_shapes()?;
        if self.projection.input_dim != self.lstm.hidden_dim
            || self.projection.output_dim != self.lstm.input_dim
        {
            return Err(Error::Shape("projection does not match lstm".into()));
        }
        Ok(())
    }

    /// SOS-prefixed input rows for a batch of symbol sequences.
    pub fn input_batch<S: AsRef<[usize]>>(&self, seqs: &[S]) -> Result<PaddedBatch> {
        let rows: Vec<Vec<usize>> = seqs
            .iter()
            .map(|s| {
                let s = s.as_ref();
                if let Some(&bad) = s.iter().find(|&&t| t >= self.num_symbols()) {
                    return Err(Error::Input(format!("symbol {bad} outside vocabulary")));
                }
                let mut row = Vec::with_capacity(s.len() + 1);
                row.push(self.sos());
                row.extend_from_slice(s);
                Ok(row)
            })
            .collect::<Result<_>>()?;
        PaddedBatch::from_sequences(&rows)
    }

    /// Per-step logits for one SOS-prefixed row.
    fn step_logits(&self, hidden: &[f64]) -> Vec<f64> {
        let mut logits = vec![0.0; self.projection.output_dim];
        self.projection.forward(hidden, &mut logits);
        logits
    }

    /// `sum_t log P(token_t | tokens_<t)` including the EOS factor. Empty sequences
    /// are allowed here and score `log P(EOS | SOS)`.
    pub fn log_prob_indices(&self, seq: &[usize]) -> Result<f64> {
        self.score_indices(seq, true)
    }

    /// Log-probability of `seq` as a prefix, without the EOS factor.
    pub fn prefix_log_prob_indices(&self, seq: &[usize]) -> Result<f64> {
        self.score_indices(seq, false)
    }

    fn score_indices(&self, seq: &[usize], with_eos: bool) -> Result<f64> {
        self.check()?;
        let batch = self.input_batch(&[seq])?;
        let out = lstm_forward(&self.lstm, &batch)?;
        let trace = &out.traces[0];
        let steps = if with_eos { trace.len() } else { seq.len() };
        let mut total = 0.0;
        for t in 0..steps {
            let target = if t < seq.len() { seq[t] } else { self.eos() };
            let (nll, _) = softmax_cross_entropy(&self.step_logits(trace.hidden_at(t)), target)?;
            total -= nll;
        }
        Ok(total)
    }

    pub fn sequence_log_prob(&self, symbols: &[EventCategory]) -> Result<f64> {
        if symbols.is_empty() {
            return Err(Error::Input("cannot score an empty session".into()));
        }
        self.log_prob_indices(&symbol_indices(symbols)?)
    }

    /// Fraction of next-token predictions (including EOS) whose argmax is correct.
    pub fn token_accuracy<S: AsRef<[usize]>>(&self, seqs: &[S]) -> Result<f64> {
        let batch = self.input_batch(seqs)?;
        let out = lstm_forward(&self.lstm, &batch)?;
        let (mut correct, mut total) = (0usize, 0usize);
        for (seq, trace) in seqs.iter().zip(&out.traces) {
            let seq = seq.as_ref();
            for t in 0..trace.len() {
                let target = if t < seq.len() { seq[t] } else { self.eos() };
                let logits = self.step_logits(trace.hidden_at(t));
                let predicted = argmax(&logits);
                correct += usize::from(predicted == target);
                total += 1;
            }
        }
        if total == 0 {
            return Err(Error::Input("no tokens to evaluate".into()));
        }
        Ok(correct as f64 / total as f64)
    }

    pub fn write_checkpoint(&self, ckpt: &mut Checkpoint, prefix: &str) {
        ckpt.push_lstm(&format!("{prefix}.lstm"), &self.lstm);
        ckpt.push_dense(&format!("{prefix}.projection"), &self.projection);
    }

    pub fn read_checkpoint(ckpt: &Checkpoint, prefix: &str) -> Result<Self> {
        let model = Self {
            lstm: ckpt.lstm(&format!("{prefix}.lstm"))?,
            projection: ckpt.dense(&format!("{prefix}.projection"))?,
        };
        model.check().map_err(|e| Error::Checkpoint(e.to_string()))?;
        Ok(model)
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl Parameterized for LmModel {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut t = self.lstm.tensors();
        t.extend(self.projection.tensors());
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = self.lstm.tensors_mut();
        t.extend(self.projection.tensors_mut());
        t
    }
}

impl SequenceScorer for LmModel {
    fn log_score(&self, symbols: &[EventCategory]) -> Result<f64> {
        self.sequence_log_prob(symbols)
    }
}

/// Mean per-token cross-entropy over a batch of SOS-prefixed rows, and its
/// gradient multiplied by `scale`.
pub fn lm_loss_and_grad(model: &LmModel, batch: &PaddedBatch, scale: f64) -> Result<(f64, LmModel)> {
    model.check()?;
    let out = lstm_forward(&model.lstm, batch)?;
    let tokens: usize = batch.lengths.iter().sum();
    if tokens == 0 {
        return Err(Error::Input("empty batch".into()));
    }
    let norm = 1.0 / tokens as f64;
    let mut grads = model.zeros_like();
    let h = model.hidden_dim();
    let mut d_hidden = Vec::with_capacity(out.traces.len());
    let mut loss = 0.0;
    for (b, trace) in out.traces.iter().enumerate() {
        let row = batch.row(b);
        let mut dh = vec![0.0; trace.len() * h];
        for t in 0..trace.len() {
            let target = if t + 1 < row.len() { row[t + 1] } else { model.eos() };
            let hidden = trace.hidden_at(t);
            let (nll, mut d_logits) = softmax_cross_entropy(&model.step_logits(hidden), target)?;
            loss += nll;
            d_logits.iter_mut().for_each(|g| *g *= norm * scale);
            model.projection.backward(
                hidden,
                &d_logits,
                &mut grads.projection,
                &mut dh[t * h..(t + 1) * h],
            );
        }
        d_hidden.push(dh);
    }
    lstm_backward(&model.lstm, &out, &d_hidden, &mut grads.lstm)?;
    Ok((loss * norm, grads))
}

/// Which validation score drives early stopping of the language models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LmValidationMetric {
    /// Next-token accuracy of each class model on its own validation sessions.
    #[default]
    TokenAccuracy,
    /// Session classification accuracy of the two-model mixture.
    MixtureAccuracy,
}

impl LmValidationMetric {
    pub fn name(self) -> &'static str {
        match self {
            LmValidationMetric::TokenAccuracy => "token",
            LmValidationMetric::MixtureAccuracy => "mixture",
        }
    }
}

impl std::str::FromStr for LmValidationMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "token" => Ok(Self::TokenAccuracy),
            "mixture" => Ok(Self::MixtureAccuracy),
            other => Err(Error::Config(format!("unknown validation metric `{other}`"))),
        }
    }
}

struct LmTrainer<'a> {
    seqs: &'a [Vec<usize>],
    lengths: Vec<usize>,
    adam: AdamState,
    rng: ChaCha8Rng,
    config: NeuralTrainConfig,
}

impl<'a> LmTrainer<'a> {
    fn new(model: &LmModel, seqs: &'a [Vec<usize>], rng: ChaCha8Rng, config: NeuralTrainConfig) -> Self {
        Self {
            seqs,
            lengths: seqs.iter().map(Vec::len).collect(),
            adam: AdamState::new(model, AdamConfig::with_learning_rate(config.learning_rate)),
            rng,
            config,
        }
    }

    fn epoch(&mut self, model: &mut LmModel) -> Result<f64> {
        let plan = batch_plan(&self.lengths, self.config.batch_size, &mut self.rng);
        let mut total = 0.0;
        for idx in &plan {
            let rows: Vec<&[usize]> = idx.iter().map(|&i| self.seqs[i].as_slice()).collect();
            let batch = model.input_batch(&rows)?;
            let (loss, mut grads) = lm_loss_and_grad(model, &batch, 1.0)?;
            if let Some(max) = self.config.clip_norm {
                clip_grad_norm(&mut grads, max);
            }
            self.adam.update(model, &grads)?;
            total += loss;
        }
        Ok(total / plan.len().max(1) as f64)
    }
}

fn class_indices(data: &Dataset, label: Label) -> Result<Vec<Vec<usize>>> {
    data.sequences_of(label)
        .into_iter()
        .map(symbol_indices)
        .collect()
}

fn init_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Trains one next-token model with early stopping on validation token accuracy.
pub fn fit_lm(
    train: &[Vec<usize>],
    val: &[Vec<usize>],
    num_symbols: usize,
    config: NeuralTrainConfig,
) -> Result<(LmModel, TrainingCurve)> {
    fit_lm_stream(train, val, num_symbols, config, 0)
}

fn fit_lm_stream(
    train: &[Vec<usize>],
    val: &[Vec<usize>],
    num_symbols: usize,
    config: NeuralTrainConfig,
    stream: u64,
) -> Result<(LmModel, TrainingCurve)> {
    if train.is_empty() {
        return Err(Error::Fit("empty training corpus".into()));
    }
    if val.is_empty() {
        return Err(Error::Fit("empty validation corpus".into()));
    }
    let mut rng = init_rng(config.seed, stream);
    let model = LmModel::init(num_symbols, config.hidden, &mut rng);
    let mut trainer = LmTrainer::new(&model, train, rng, config);
    run_early_stopping(
        config.early_stopping,
        model,
        |m, _| trainer.epoch(m),
        |m| m.token_accuracy(val),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmMixtureFit {
    pub mixture: LmMixture,
    /// One curve per class model for token accuracy, a single joint curve for mixture accuracy.
    pub curves: Vec<TrainingCurve>,
}

/// Trains the BUY and NOBUY language models with one shared hyperparameter setting.
pub fn fit_lm_mixture(
    train: &Dataset,
    val: &Dataset,
    config: NeuralTrainConfig,
    metric: LmValidationMetric,
    priors: PriorMode,
) -> Result<LmMixtureFit> {
    let priors: Priors = priors.priors_for(train)?;
    let train_buy = class_indices(train, Label::Buy)?;
    let train_nobuy = class_indices(train, Label::NoBuy)?;
    match metric {
        LmValidationMetric::TokenAccuracy => {
            let val_buy = class_indices(val, Label::Buy)?;
            let val_nobuy = class_indices(val, Label::NoBuy)?;
            let (buy, curve_buy) = fit_lm_stream(&train_buy, &val_buy, NUM_SYMBOLS, config, 0)?;
            let (nobuy, curve_nobuy) =
                fit_lm_stream(&train_nobuy, &val_nobuy, NUM_SYMBOLS, config, 1)?;
            Ok(LmMixtureFit {
                mixture: Mixture::new(buy, nobuy, priors),
                curves: vec![curve_buy, curve_nobuy],
            })
        }
        LmValidationMetric::MixtureAccuracy => {
            if train_buy.is_empty() || train_nobuy.is_empty() {
                return Err(Error::Fit("both classes are required".into()));
            }
            let mut rng_buy = init_rng(config.seed, 0);
            let mut rng_nobuy = init_rng(config.seed, 1);
            let buy = LmModel::init(NUM_SYMBOLS, config.hidden, &mut rng_buy);
            let nobuy = LmModel::init(NUM_SYMBOLS, config.hidden, &mut rng_nobuy);
            let mut t_buy = LmTrainer::new(&buy, &train_buy, rng_buy, config);
            let mut t_nobuy = LmTrainer::new(&nobuy, &train_nobuy, rng_nobuy, config);
            let (mixture, curve) = run_early_stopping(
                config.early_stopping,
                Mixture::new(buy, nobuy, priors),
                |m, _| {
                    let a = t_buy.epoch(&mut m.buy)?;
                    let b = t_nobuy.epoch(&mut m.nobuy)?;
                    Ok(0.5 * (a + b))
                },
                |m| accuracy(m, val),
            )?;
            Ok(LmMixtureFit {
                mixture,
                curves: vec![curve],
            })
        }
    }
}

pub fn mixture_to_checkpoint(mix: &LmMixture) -> Checkpoint {
    let mut ckpt = Checkpoint::new("lm-mixture");
    ckpt.set_meta("log_prior_buy", mix.priors.log_buy);
    ckpt.set_meta("log_prior_nobuy", mix.priors.log_nobuy);
    mix.buy.write_checkpoint(&mut ckpt, "buy");
    mix.nobuy.write_checkpoint(&mut ckpt, "nobuy");
    ckpt
}

pub fn mixture_from_checkpoint(ckpt: &Checkpoint) -> Result<LmMixture> {
    if ckpt.kind != "lm-mixture" {
        return Err(Error::Checkpoint(format!("expected lm-mixture, found `{}`", ckpt.kind)));
    }
    Ok(Mixture::new(
        LmModel::read_checkpoint(ckpt, "buy")?,
        LmModel::read_checkpoint(ckpt, "nobuy")?,
        Priors {
            log_buy: ckpt.meta_parsed("log_prior_buy")?,
            log_nobuy: ckpt.meta_parsed("log_prior_nobuy")?,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::Classifier;
    use crate::session::EventCategory::*;

    #[test]
    fn zero_model_is_uniform() {
        let lm = LmModel::zeros(NUM_SYMBOLS, 8);
        let s = [View, Click, Detail, View, View, AddToCart, View, RemoveFromCart, View, View];
        let lp = lm.sequence_log_prob(&s).unwrap();
        assert!((lp - 11.0 * (1.0f64 / 6.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn extending_a_prefix_lowers_its_probability() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let lm = LmModel::init(NUM_SYMBOLS, 6, &mut rng);
        let s = [0, 1, 2, 0, 4, 3, 3];
        let mut prev = 0.0;
        for n in 1..=s.len() {
            let lp = lm.prefix_log_prob_indices(&s[..n]).unwrap();
            assert!(lp < prev);
            prev = lp;
        }
        let with_eos = lm.log_prob_indices(&s).unwrap();
        assert!(with_eos < prev);
    }

    #[test]
    fn rejects_empty_and_out_of_vocabulary() {
        let lm = LmModel::zeros(NUM_SYMBOLS, 4);
        assert!(lm.sequence_log_prob(&[]).is_err());
        assert!(lm.sequence_log_prob(&[Buy]).is_err());
        assert!(lm.log_prob_indices(&[9]).is_err());
    }

    #[test]
    fn identical_models_tie_to_nobuy() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let lm = LmModel::init(NUM_SYMBOLS, 5, &mut rng);
        let mix = Mixture::new(lm.clone(), lm, Priors::uniform());
        assert_eq!(mix.predict(&[View, Detail]).unwrap(), Label::NoBuy);
    }

    #[test]
    fn empty_corpus_is_a_fit_error() {
        let cfg = NeuralTrainConfig::default();
        assert!(matches!(fit_lm(&[], &[vec![0]], 5, cfg), Err(Error::Fit(_))));
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mix = Mixture::new(
            LmModel::init(NUM_SYMBOLS, 3, &mut rng),
            LmModel::init(NUM_SYMBOLS, 3, &mut rng),
            Priors::from_buy_probability(0.3),
        );
        let text = mixture_to_checkpoint(&mix).to_text();
        let back = mixture_from_checkpoint(&Checkpoint::from_text(&text).unwrap()).unwrap();
        assert_eq!(back, mix);
    }
}
