use std::fmt;

use crate::classify::{accuracy, Classifier, PriorMode, Priors};
use crate::error::{Error, Result};
use crate::lm::{fit_lm_mixture, mixture_from_checkpoint, mixture_to_checkpoint, LmMixture, LmValidationMetric};
use crate::markov::{fit_mixture, MarkovModel, MixtureClassifier};
use crate::neural::{Checkpoint, NeuralTrainConfig, TrainingCurve};
use crate::seq2label::{fit_s2l, Pooling, S2lModel};
use crate::session::{Dataset, EventCategory, Label};
use crate::textio::Lines;
use crate::visibility::{fit_vg, VgConfig, VgPipeline};

const MODEL_MAGIC: &str = "clickstream-model v1";

/// The five benchmark rows, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    Markov,
    LanguageModel,
    VisibilityGraph,
    S2lAvg,
    S2lLast,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Markov,
        ModelKind::LanguageModel,
        ModelKind::VisibilityGraph,
        ModelKind::S2lAvg,
        ModelKind::S2lLast,
    ];

    /// Short identifier used in configs and on the command line.
    pub fn key(self) -> &'static str {
        match self {
            ModelKind::Markov => "markov",
            ModelKind::LanguageModel => "lm",
            ModelKind::VisibilityGraph => "vg",
            ModelKind::S2lAvg => "s2l-avg",
            ModelKind::S2lLast => "s2l-last",
        }
    }

    /// Row label in reports.
    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::Markov => "Markov Chain",
            ModelKind::LanguageModel => "LSTM - Language Model",
            ModelKind::VisibilityGraph => "Visibility Graphs",
            ModelKind::S2lAvg => "LSTM - S2L ('avg' pooling)",
            ModelKind::S2lLast => "LSTM - S2L ('last')",
        }
    }

    /// Whether repeated runs with different seeds can differ.
    pub fn seed_dependent(self) -> bool {
        matches!(self, ModelKind::LanguageModel | ModelKind::S2lAvg | ModelKind::S2lLast)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.key() == s)
            .ok_or_else(|| Error::Config(format!("unknown model `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Hyperparams {
    Markov { order: usize, alpha: f64 },
    Lm { train: NeuralTrainConfig, metric: LmValidationMetric },
    Vg(VgConfig),
    S2l { train: NeuralTrainConfig, pooling: Pooling },
}

impl Hyperparams {
    pub fn kind(&self) -> ModelKind {
        match self {
            Hyperparams::Markov { .. } => ModelKind::Markov,
            Hyperparams::Lm { .. } => ModelKind::LanguageModel,
            Hyperparams::Vg(_) => ModelKind::VisibilityGraph,
            Hyperparams::S2l { pooling: Pooling::Avg, .. } => ModelKind::S2lAvg,
            Hyperparams::S2l { pooling: Pooling::Last, .. } => ModelKind::S2lLast,
        }
    }

    /// Same hyperparameters with a different training seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        match &mut out {
            Hyperparams::Lm { train, .. } | Hyperparams::S2l { train, .. } => train.seed = seed,
            Hyperparams::Markov { .. } | Hyperparams::Vg(_) => {}
        }
        out
    }

    /// Compact `key=value` summary, without the seed.
    pub fn describe(&self) -> String {
        match self {
            Hyperparams::Markov { order, alpha } => format!("order={order} alpha={alpha}"),
            Hyperparams::Lm { train, metric } => format!(
                "hidden={} lr={} batch={} metric={}",
                train.hidden,
                train.learning_rate,
                train.batch_size,
                metric.name()
            ),
            Hyperparams::Vg(c) => {
                let order: Vec<&str> = c.codebook.order().iter().map(|e| e.token()).collect();
                format!(
                    "k={} codebook={} variance={} C={}",
                    c.k,
                    order.join(":"),
                    c.variance_target,
                    c.svm.c
                )
            }
            Hyperparams::S2l { train, pooling } => format!(
                "hidden={} lr={} batch={} pooling={}",
                train.hidden, train.learning_rate, train.batch_size, pooling
            ),
        }
    }
}

#[derive(Debug, Clone)]
pub enum TrainedModel {
    Markov(MixtureClassifier),
    Lm(LmMixture),
    Vg(VgPipeline),
    S2l(S2lModel),
}

impl Classifier for TrainedModel {
    fn predict(&self, symbols: &[EventCategory]) -> Result<Label> {
        match self {
            TrainedModel::Markov(m) => m.predict(symbols),
            TrainedModel::Lm(m) => m.predict(symbols),
            TrainedModel::Vg(m) => m.predict(symbols),
            TrainedModel::S2l(m) => m.predict(symbols),
        }
    }
}

impl TrainedModel {
    pub fn kind_name(&self) -> &'static str {
        match self {
            TrainedModel::Markov(_) => "markov",
            TrainedModel::Lm(_) => "lm",
            TrainedModel::Vg(_) => "vg",
            TrainedModel::S2l(_) => "s2l",
        }
    }

    /// Self-describing text file for `evaluate`.
    pub fn to_text(&self) -> String {
        let mut out = format!("{MODEL_MAGIC}\nmodel {}\n", self.kind_name());
        match self {
            TrainedModel::Markov(m) => {
                out.push_str(&format!("priors {} {}\n", m.priors.log_buy, m.priors.log_nobuy));
                out.push_str(&m.buy.to_text());
                out.push_str(&m.nobuy.to_text());
            }
            TrainedModel::Lm(m) => out.push_str(&mixture_to_checkpoint(m).to_text()),
            TrainedModel::Vg(m) => out.push_str(&m.to_checkpoint().to_text()),
            TrainedModel::S2l(m) => out.push_str(&m.to_checkpoint().to_text()),
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = Lines::new(text);
        lines.expect_exact(MODEL_MAGIC)?;
        let kind = lines.expect_key("model")?;
        // Everything after the two header lines belongs to the model body.
        let body = text.splitn(3, '\n').nth(2).unwrap_or("");
        match kind {
            "markov" => {
                let raw = lines.expect_key("priors")?;
                let priors: Vec<f64> = lines.parse_values(raw)?;
                if priors.len() != 2 {
                    return Err(lines.error("expected two log priors"));
                }
                let buy = MarkovModel::read_from(&mut lines)?;
                let nobuy = MarkovModel::read_from(&mut lines)?;
                Ok(TrainedModel::Markov(MixtureClassifier::new(
                    buy,
                    nobuy,
                    Priors {
                        log_buy: priors[0],
                        log_nobuy: priors[1],
                    },
                )))
            }
            "lm" => Ok(TrainedModel::Lm(mixture_from_checkpoint(&Checkpoint::from_text(body)?)?)),
            "vg" => Ok(TrainedModel::Vg(VgPipeline::from_checkpoint(&Checkpoint::from_text(body)?)?)),
            "s2l" => Ok(TrainedModel::S2l(S2lModel::from_checkpoint(&Checkpoint::from_text(body)?)?)),
            other => Err(Error::Checkpoint(format!("unknown model kind `{other}`"))),
        }
    }
}

/// A fitted model plus the validation curves that produced it.
#[derive(Debug, Clone)]
pub struct TrainedRun {
    pub model: TrainedModel,
    /// `(name, curve)`; the LM with token accuracy yields one curve per class.
    pub curves: Vec<(String, TrainingCurve)>,
    pub val_accuracy: f64,
}

/// Fits one model. One-shot models record a single-point curve.
pub fn run_training(hp: &Hyperparams, train: &Dataset, val: &Dataset, priors: PriorMode) -> Result<TrainedRun> {
    let (model, curves) = match hp {
        Hyperparams::Markov { order, alpha } => {
            let m = fit_mixture(train, *order, *alpha, priors)?;
            let acc = accuracy(&m, val)?;
            (TrainedModel::Markov(m), vec![("single".to_string(), TrainingCurve::single_point(acc))])
        }
        Hyperparams::Lm { train: cfg, metric } => {
            let fit = fit_lm_mixture(train, val, *cfg, *metric, priors)?;
            let names: &[&str] = if fit.curves.len() == 2 { &["buy", "nobuy"] } else { &["joint"] };
            let curves = names.iter().map(|n| n.to_string()).zip(fit.curves).collect();
            (TrainedModel::Lm(fit.mixture), curves)
        }
        Hyperparams::Vg(cfg) => {
            let m = fit_vg(train, cfg)?;
            let acc = accuracy(&m, val)?;
            (TrainedModel::Vg(m), vec![("single".to_string(), TrainingCurve::single_point(acc))])
        }
        Hyperparams::S2l { train: cfg, pooling } => {
            let (m, curve) = fit_s2l(train, val, *pooling, *cfg)?;
            (TrainedModel::S2l(m), vec![("joint".to_string(), curve)])
        }
    };
    let val_accuracy = accuracy(&model, val)?;
    Ok(TrainedRun {
        model,
        curves,
        val_accuracy,
    })
}

/// Test-set accuracy.
pub fn evaluate<C: Classifier + ?Sized>(model: &C, test: &Dataset) -> Result<f64> {
    accuracy(model, test)
}
