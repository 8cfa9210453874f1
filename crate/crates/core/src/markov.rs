//! Mixture-of-Markov-chains classifier.
//!
//! Each class gets its own order-`k` chain over the session symbols plus a
//! start-of-sequence token. Sequences are left-padded with `k` SOS tokens so
//! every position has a full context, and conditionals use add-alpha
//! smoothing over the whole alphabet (symbols and SOS):
//!
//! ```text
//! P(t | c) = (count(c, t) + alpha) / (count(c, .) + alpha * |alphabet|)
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::classify::{accuracy, Mixture, PriorMode, SequenceScorer};
use crate::error::{Error, Result};
use crate::session::{Dataset, EventCategory, Label, NUM_SYMBOLS};
use crate::textio::{join_values, Lines};

pub const DEFAULT_ORDER: usize = 5;
pub const DEFAULT_ALPHA: f64 = 1.0;

/// Longest order whose contexts still pack into a `u64` key for small alphabets.
const MAX_ORDER: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovModel {
    order: usize,
    num_symbols: usize,
    alpha: f64,
    /// Context key -> per-token counts (length `alphabet_size`).
    counts: BTreeMap<u64, Vec<u64>>,
}

pub type MixtureClassifier = Mixture<MarkovModel>;

impl MarkovModel {
    /// Fits a chain over symbols `0..num_symbols`; token `num_symbols` is SOS.
    pub fn fit_indices<S: AsRef<[usize]>>(
        corpus: &[S],
        num_symbols: usize,
        order: usize,
        alpha: f64,
    ) -> Result<Self> {
        if order == 0 || order > MAX_ORDER {
            return Err(Error::Fit(format!("order must be in 1..={MAX_ORDER}, got {order}")));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Fit(format!("alpha must be positive, got {alpha}")));
        }
        if corpus.is_empty() {
            return Err(Error::Fit("empty corpus".into()));
        }
        if (num_symbols as u64 + 1).checked_pow(order as u32).is_none() {
            return Err(Error::Fit("context space too large".into()));
        }
        let mut model = Self {
            order,
            num_symbols,
            alpha,
            counts: BTreeMap::new(),
        };
        for seq in corpus {
            model.add_sequence(seq.as_ref())?;
        }
        Ok(model)
    }

    pub fn fit(corpus: &[&[EventCategory]], order: usize, alpha: f64) -> Result<Self> {
        let indexed = corpus
            .iter()
            .map(|s| symbol_indices(s))
            .collect::<Result<Vec<_>>>()?;
        Self::fit_indices(&indexed, NUM_SYMBOLS, order, alpha)
    }

    /// Accumulates one more training sequence.
    pub fn add_sequence(&mut self, seq: &[usize]) -> Result<()> {
        let alphabet = self.alphabet_size();
        let mut context = vec![self.sos(); self.order];
        for &token in seq {
            self.check_symbol(token)?;
            let key = self.key(&context);
            self.counts.entry(key).or_insert_with(|| vec![0; alphabet])[token] += 1;
            context.rotate_left(1);
            *context.last_mut().expect("order >= 1") = token;
        }
        Ok(())
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn num_symbols(&self) -> usize {
        self.num_symbols
    }

    /// Symbols plus SOS.
    pub fn alphabet_size(&self) -> usize {
        self.num_symbols + 1
    }

    pub fn sos(&self) -> usize {
        self.num_symbols
    }

    /// Number of contexts observed during fitting.
    pub fn num_contexts(&self) -> usize {
        self.counts.len()
    }

    fn check_symbol(&self, token: usize) -> Result<()> {
        if token < self.num_symbols {
            Ok(())
        } else {
            Err(Error::Input(format!(
                "symbol {token} outside alphabet of {} symbols",
                self.num_symbols
            )))
        }
    }

    fn key(&self, context: &[usize]) -> u64 {
        let base = self.alphabet_size() as u64;
        context.iter().fold(0u64, |acc, &t| acc * base + t as u64)
    }

    fn unkey(&self, mut key: u64) -> Vec<usize> {
        let base = self.alphabet_size() as u64;
        let mut context = vec![0; self.order];
        for slot in context.iter_mut().rev() {
            *slot = (key % base) as usize;
            key /= base;
        }
        context
    }

    /// Raw count of `token` following `context`.
    pub fn count(&self, context: &[usize], token: usize) -> u64 {
        self.counts
            .get(&self.key(context))
            .map_or(0, |row| row[token])
    }

    /// Total count of transitions out of `context`.
    pub fn context_total(&self, context: &[usize]) -> u64 {
        self.counts
            .get(&self.key(context))
            .map_or(0, |row| row.iter().sum())
    }

    /// Smoothed conditional distribution over the full alphabet.
    pub fn conditional(&self, context: &[usize]) -> Result<Vec<f64>> {
        if context.len() != self.order {
            return Err(Error::Input(format!(
                "context length {} != order {}",
                context.len(),
                self.order
            )));
        }
        if let Some(&bad) = context.iter().find(|&&t| t > self.sos()) {
            return Err(Error::Input(format!("token {bad} outside alphabet")));
        }
        let alphabet = self.alphabet_size();
        let denom_extra = self.alpha * alphabet as f64;
        Ok(match self.counts.get(&self.key(context)) {
            Some(row) => {
                let total: u64 = row.iter().sum();
                let denom = total as f64 + denom_extra;
                row.iter().map(|&c| (c as f64 + self.alpha) / denom).collect()
            }
            None => vec![1.0 / alphabet as f64; alphabet],
        })
    }

    fn log_prob(&self, key: u64, token: usize) -> f64 {
        let alphabet = self.alphabet_size() as f64;
        match self.counts.get(&key) {
            Some(row) => {
                let total: u64 = row.iter().sum();
                ((row[token] as f64 + self.alpha) / (total as f64 + self.alpha * alphabet)).ln()
            }
            None => -alphabet.ln(),
        }
    }

    /// Sum of smoothed log conditionals along `seq` with SOS-padded contexts.
    pub fn log_likelihood_indices(&self, seq: &[usize]) -> Result<f64> {
        if seq.is_empty() {
            return Err(Error::Input("cannot score an empty sequence".into()));
        }
        let mut context = vec![self.sos(); self.order];
        let mut total = 0.0;
        for &token in seq {
            self.check_symbol(token)?;
            total += self.log_prob(self.key(&context), token);
            context.rotate_left(1);
            *context.last_mut().expect("order >= 1") = token;
        }
        Ok(total)
    }

    pub fn log_likelihood(&self, seq: &[EventCategory]) -> Result<f64> {
        self.log_likelihood_indices(&symbol_indices(seq)?)
    }

    /// Plain-text serialization; [`MarkovModel::from_text`] round-trips it exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("markov-chain v1\n");
        writeln!(out, "order {}", self.order).unwrap();
        writeln!(out, "alpha {}", self.alpha).unwrap();
        writeln!(out, "symbols {}", self.num_symbols).unwrap();
        writeln!(out, "contexts {}", self.counts.len()).unwrap();
        for (&key, row) in &self.counts {
            writeln!(out, "{}\t{}", join_values(&self.unkey(key)), join_values(row)).unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = Lines::new(text);
        let model = Self::read_from(&mut lines)?;
        Ok(model)
    }

    pub(crate) fn read_from(lines: &mut Lines<'_>) -> Result<Self> {
        lines.expect_exact("markov-chain v1")?;
        let order: usize = lines.expect_parsed("order")?;
        let alpha: f64 = lines.expect_parsed("alpha")?;
        let num_symbols: usize = lines.expect_parsed("symbols")?;
        let n_contexts: usize = lines.expect_parsed("contexts")?;
        if order == 0 || order > MAX_ORDER || !(alpha > 0.0) {
            return Err(lines.error("invalid order or alpha"));
        }
        let mut model = Self {
            order,
            num_symbols,
            alpha,
            counts: BTreeMap::new(),
        };
        for _ in 0..n_contexts {
            let line = lines.next_line()?;
            let (ctx, row) = line
                .split_once('\t')
                .ok_or_else(|| lines.error("expected `<context>\\t<counts>`"))?;
            let ctx: Vec<usize> = lines.parse_values(ctx)?;
            let row: Vec<u64> = lines.parse_values(row)?;
            if ctx.len() != order
                || row.len() != model.alphabet_size()
                || ctx.iter().any(|&t| t > model.sos())
            {
                return Err(lines.error("context or count row has the wrong shape"));
            }
            let key = model.key(&ctx);
            model.counts.insert(key, row);
        }
        Ok(model)
    }
}

impl SequenceScorer for MarkovModel {
    fn log_score(&self, symbols: &[EventCategory]) -> Result<f64> {
        self.log_likelihood(symbols)
    }
}

pub(crate) fn symbol_indices(seq: &[EventCategory]) -> Result<Vec<usize>> {
    seq.iter()
        .map(|c| {
            c.symbol_index()
                .ok_or_else(|| Error::Input(format!("`{c}` is not a session symbol")))
        })
        .collect()
}

/// Fits one chain per class on `train`.
pub fn fit_mixture(
    train: &Dataset,
    order: usize,
    alpha: f64,
    priors: PriorMode,
) -> Result<MixtureClassifier> {
    let buy = MarkovModel::fit(&train.sequences_of(Label::Buy), order, alpha)?;
    let nobuy = MarkovModel::fit(&train.sequences_of(Label::NoBuy), order, alpha)?;
    Ok(Mixture::new(buy, nobuy, priors.priors_for(train)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderSelection {
    pub best_order: usize,
    /// `(order, validation accuracy)` for every candidate, in candidate order.
    pub curve: Vec<(usize, f64)>,
}

/// Picks the order with the highest validation accuracy; ties go to the smaller order.
pub fn select_order(
    train: &Dataset,
    val: &Dataset,
    orders: &[usize],
    alpha: f64,
    priors: PriorMode,
) -> Result<OrderSelection> {
    if orders.is_empty() {
        return Err(Error::Input("no candidate orders".into()));
    }
    if orders.len() == 1 {
        let order = orders[0];
        let acc = accuracy(&fit_mixture(train, order, alpha, priors)?, val)?;
        return Ok(OrderSelection {
            best_order: order,
            curve: vec![(order, acc)],
        });
    }
    let mut curve = Vec::with_capacity(orders.len());
    for &order in orders {
        let clf = fit_mixture(train, order, alpha, priors)?;
        curve.push((order, accuracy(&clf, val)?));
    }
    let best_order = curve
        .iter()
        .copied()
        .reduce(|best, cand| {
            if cand.1 > best.1 || (cand.1 == best.1 && cand.0 < best.0) {
                cand
            } else {
                best
            }
        })
        .map(|(order, _)| order)
        .expect("non-empty");
    Ok(OrderSelection { best_order, curve })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{Classifier, Priors};
    use crate::session::Label;

    const A: usize = 0;
    const B: usize = 1;

    fn toy() -> MarkovModel {
        MarkovModel::fit_indices(&[vec![A, B, A], vec![A, A]], 2, 1, 1.0).unwrap()
    }

    #[test]
    fn add_one_smoothing_on_toy_corpus() {
        let m = toy();
        let p = m.conditional(&[A]).unwrap();
        assert!((p[B] - 0.4).abs() < 1e-15);
        assert_eq!(m.context_total(&[A]), 2);
    }

    #[test]
    fn toy_log_likelihood() {
        // SOS -> A seen twice (both sequences start with A), SOS total 2.
        let m = toy();
        let expected = (3.0f64 / 5.0).ln() + (2.0f64 / 5.0).ln();
        assert!((m.log_likelihood_indices(&[A, B]).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn unseen_context_is_uniform() {
        let m = toy();
        assert_eq!(m.context_total(&[B]), 1);
        let m2 = MarkovModel::fit_indices(&[vec![A]], 2, 2, 1.0).unwrap();
        assert_eq!(m2.conditional(&[B, B]).unwrap(), vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn uniform_model_likelihood() {
        let empty: Vec<usize> = Vec::new();
        let m = MarkovModel::fit_indices(&[empty], 5, 2, 1.0).unwrap();
        assert_eq!(m.num_contexts(), 0);
        let ll = m.log_likelihood_indices(&[0, 1, 2, 3, 4, 0, 1, 2, 3, 4]).unwrap();
        assert!((ll - 10.0 * (1.0f64 / 6.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn deterministic_chain_has_near_zero_log_likelihood() {
        let seq = vec![0, 1, 2, 3, 4, 0, 1, 2];
        let m = MarkovModel::fit_indices(&vec![seq.clone(); 50], 5, 1, 1e-9).unwrap();
        let ll = m.log_likelihood_indices(&seq).unwrap();
        assert!(ll <= 0.0 && ll > -1e-6, "{ll}");
    }

    #[test]
    fn default_order_is_five() {
        assert_eq!(DEFAULT_ORDER, 5);
    }

    #[test]
    fn errors() {
        assert!(MarkovModel::fit_indices::<Vec<usize>>(&[], 2, 1, 1.0).is_err());
        assert!(MarkovModel::fit_indices(&[vec![A]], 2, 0, 1.0).is_err());
        assert!(MarkovModel::fit_indices(&[vec![A]], 2, 1, 0.0).is_err());
        assert!(MarkovModel::fit_indices(&[vec![7]], 2, 1, 1.0).is_err());
        let m = toy();
        assert!(m.log_likelihood_indices(&[A, 2]).is_err());
        assert!(m.log_likelihood_indices(&[]).is_err());
        assert!(m.log_likelihood(&[EventCategory::Buy]).is_err());
    }

    #[test]
    fn identical_models_tie_to_nobuy() {
        let mix = Mixture::new(toy(), toy(), Priors::uniform());
        // Score via indices-compatible categories: View=0, Click=1.
        let s = [EventCategory::View, EventCategory::Click];
        assert_eq!(mix.predict(&s).unwrap(), Label::NoBuy);
    }

    #[test]
    fn text_round_trip() {
        let m = MarkovModel::fit_indices(
            &[vec![0, 1, 2, 3, 4, 4, 3], vec![2, 2, 1]],
            5,
            3,
            0.37,
        )
        .unwrap();
        let text = m.to_text();
        let back = MarkovModel::from_text(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn rejects_malformed_text() {
        assert!(MarkovModel::from_text("markov-chain v2\n").is_err());
        let bad = "markov-chain v1\norder 1\nalpha 1\nsymbols 2\ncontexts 1\n0 1\t1 2 3\n";
        assert!(MarkovModel::from_text(bad).is_err());
    }
}
