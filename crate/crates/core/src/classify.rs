//! Decision rules shared by every model family.

use crate::error::{Error, Result};
use crate::session::{Dataset, EventCategory, Label};

/// A model mapping a whole session to a label.
pub trait Classifier {
    fn predict(&self, symbols: &[EventCategory]) -> Result<Label>;
}

/// A per-class sequence model that assigns a log-probability to a session.
pub trait SequenceScorer {
    fn log_score(&self, symbols: &[EventCategory]) -> Result<f64>;
}

/// BUY iff the BUY score is strictly greater; ties (including two `-inf`) go to NOBUY.
pub fn mixture_decision(score_buy: f64, score_nobuy: f64) -> Label {
    if score_buy > score_nobuy {
        Label::Buy
    } else {
        Label::NoBuy
    }
}

/// Log class priors of a two-class mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Priors {
    pub log_buy: f64,
    pub log_nobuy: f64,
}

impl Priors {
    pub fn uniform() -> Self {
        Self::from_buy_probability(0.5)
    }

    pub fn from_buy_probability(p: f64) -> Self {
        Self {
            log_buy: p.ln(),
            log_nobuy: (1.0 - p).ln(),
        }
    }

    /// Empirical class frequencies of a training set.
    pub fn empirical(n_buy: usize, n_nobuy: usize) -> Result<Self> {
        let total = n_buy + n_nobuy;
        if total == 0 {
            return Err(Error::Fit("cannot estimate priors from no sessions".into()));
        }
        Ok(Self::from_buy_probability(n_buy as f64 / total as f64))
    }
}

/// Which prior a mixture uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PriorMode {
    #[default]
    Empirical,
    Uniform,
}

impl PriorMode {
    pub fn name(self) -> &'static str {
        match self {
            PriorMode::Empirical => "empirical",
            PriorMode::Uniform => "uniform",
        }
    }

    pub fn priors_for(self, train: &Dataset) -> Result<Priors> {
        match self {
            PriorMode::Empirical => {
                Priors::empirical(train.count(Label::Buy), train.count(Label::NoBuy))
            }
            PriorMode::Uniform => Ok(Priors::uniform()),
        }
    }
}

impl std::str::FromStr for PriorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "empirical" => Ok(Self::Empirical),
            "uniform" => Ok(Self::Uniform),
            other => Err(Error::Config(format!("unknown prior mode `{other}`"))),
        }
    }
}

/// Generative two-class classifier: one sequence model per class plus priors.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixture<M> {
    pub buy: M,
    pub nobuy: M,
    pub priors: Priors,
}

impl<M: SequenceScorer> Mixture<M> {
    pub fn new(buy: M, nobuy: M, priors: Priors) -> Self {
        Self { buy, nobuy, priors }
    }

    /// Prior-weighted log scores `(buy, nobuy)`.
    pub fn scores(&self, symbols: &[EventCategory]) -> Result<(f64, f64)> {
        Ok((
            self.priors.log_buy + self.buy.log_score(symbols)?,
            self.priors.log_nobuy + self.nobuy.log_score(symbols)?,
        ))
    }
}

impl<M: SequenceScorer> Classifier for Mixture<M> {
    fn predict(&self, symbols: &[EventCategory]) -> Result<Label> {
        let (buy, nobuy) = self.scores(symbols)?;
        Ok(mixture_decision(buy, nobuy))
    }
}

/// Fraction of sessions whose predicted label matches the true one.
pub fn accuracy<C: Classifier + ?Sized>(model: &C, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Input("cannot evaluate on an empty dataset".into()));
    }
    let mut correct = 0usize;
    for session in data.iter() {
        if model.predict(session.symbols())? == session.label() {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed(f64);

    impl SequenceScorer for Fixed {
        fn log_score(&self, _: &[EventCategory]) -> Result<f64> {
            Ok(self.0)
        }
    }

    #[test]
    fn ties_go_to_nobuy() {
        assert_eq!(mixture_decision(-3.0, -3.0), Label::NoBuy);
        assert_eq!(
            mixture_decision(f64::NEG_INFINITY, f64::NEG_INFINITY),
            Label::NoBuy
        );
    }

    #[test]
    fn higher_buy_score_wins() {
        let mix = Mixture::new(Fixed(-5.0), Fixed(-7.0), Priors::uniform());
        assert_eq!(mix.predict(&[]).unwrap(), Label::Buy);
    }

    #[test]
    fn priors_normalize() {
        let p = Priors::empirical(7_176, 123_396).unwrap();
        assert!((p.log_buy.exp() + p.log_nobuy.exp() - 1.0).abs() < 1e-9);
        assert!(Priors::empirical(0, 0).is_err());
    }

    #[test]
    fn constant_shift_preserves_decision() {
        for (b, n) in [(-5.0, -7.0), (-7.0, -5.0), (-4.0, -4.0)] {
            let base = mixture_decision(b, n);
            for shift in [-100.0, -1.5, 0.0, 3.25, 1e3] {
                assert_eq!(mixture_decision(b + shift, n + shift), base);
            }
        }
    }
}
