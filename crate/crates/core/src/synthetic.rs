//! Synthetic labeled sessions drawn from known generating processes, and the
//! Bayes-optimal accuracy of those processes.

use std::fmt;
use std::str::FromStr;

use ini::Ini;
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::classify::{accuracy, mixture_decision, Classifier, Mixture, Priors, SequenceScorer};
use crate::error::{Error, Result};
use crate::session::{
    Dataset, EventCategory, LabeledSession, Label, Provenance, MAX_SESSION_LEN, MIN_SESSION_LEN,
    NUM_SYMBOLS,
};

const ROW_TOLERANCE: f64 = 1e-12;

/// Order-1 chain over the five session symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    pub initial: [f64; NUM_SYMBOLS],
    pub transitions: [[f64; NUM_SYMBOLS]; NUM_SYMBOLS],
}

impl ChainSpec {
    /// Independent draws from `row` at every step.
    pub fn iid(row: [f64; NUM_SYMBOLS]) -> Self {
        Self {
            initial: row,
            transitions: [row; NUM_SYMBOLS],
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_distribution("initial distribution", &self.initial)?;
        for (i, row) in self.transitions.iter().enumerate() {
            check_distribution(&format!("transition row {i}"), row)?;
        }
        Ok(())
    }

    /// Samples `len` symbol indices.
    pub fn sample<R: Rng>(&self, len: usize, rng: &mut R) -> Vec<usize> {
        let initial = WeightedIndex::new(self.initial).expect("validated distribution");
        let rows: Vec<_> = self
            .transitions
            .iter()
            .map(|r| WeightedIndex::new(r).expect("validated distribution"))
            .collect();
        let mut out = Vec::with_capacity(len);
        if len == 0 {
            return out;
        }
        out.push(initial.sample(rng));
        for _ in 1..len {
            let prev = *out.last().expect("non-empty");
            out.push(rows[prev].sample(rng));
        }
        out
    }

    /// Exact log-probability of a symbol sequence; `-inf` on zero-probability steps.
    pub fn log_prob(&self, seq: &[usize]) -> f64 {
        let Some((&first, rest)) = seq.split_first() else {
            return 0.0;
        };
        let mut total = self.initial[first].ln();
        let mut prev = first;
        for &s in rest {
            total += self.transitions[prev][s].ln();
            prev = s;
        }
        total
    }
}

impl SequenceScorer for ChainSpec {
    fn log_score(&self, symbols: &[EventCategory]) -> Result<f64> {
        Ok(self.log_prob(&crate::markov::symbol_indices(symbols)?))
    }
}

fn check_distribution(what: &str, p: &[f64]) -> Result<()> {
    if p.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::Spec(format!("{what} has a negative or non-finite entry")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > ROW_TOLERANCE {
        return Err(Error::Spec(format!("{what} sums to {sum}, not 1")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum LengthDist {
    /// Uniform over `min..=max`.
    Uniform { min: usize, max: usize },
    /// Explicit `(length, weight)` pairs; weights need not be normalized.
    Weighted(Vec<(usize, f64)>),
}

impl LengthDist {
    pub fn support(&self) -> Vec<usize> {
        match self {
            LengthDist::Uniform { min, max } => (*min..=*max).collect(),
            LengthDist::Weighted(pairs) => pairs
                .iter()
                .filter(|(_, w)| *w > 0.0)
                .map(|(l, _)| *l)
                .collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        let in_range = |l: usize| (MIN_SESSION_LEN..=MAX_SESSION_LEN).contains(&l);
        match self {
            LengthDist::Uniform { min, max } => {
                if min > max || !in_range(*min) || !in_range(*max) {
                    return Err(Error::Spec(format!(
                        "length range {min}..={max} must lie in {MIN_SESSION_LEN}..={MAX_SESSION_LEN}"
                    )));
                }
            }
            LengthDist::Weighted(pairs) => {
                if pairs.is_empty()
                    || pairs.iter().any(|&(l, w)| !in_range(l) || !(w >= 0.0) || !w.is_finite())
                    || pairs.iter().all(|&(_, w)| w == 0.0)
                {
                    return Err(Error::Spec("invalid weighted length distribution".into()));
                }
            }
        }
        Ok(())
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        match self {
            LengthDist::Uniform { min, max } => rng.gen_range(*min..=*max),
            LengthDist::Weighted(pairs) => {
                let idx = WeightedIndex::new(pairs.iter().map(|p| p.1))
                    .expect("validated weights")
                    .sample(rng);
                pairs[idx].0
            }
        }
    }
}

impl Default for LengthDist {
    fn default() -> Self {
        LengthDist::Uniform { min: 10, max: 60 }
    }
}

/// How a generated session gets its label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Labeling {
    /// BUY sessions come from `buy_chain`, NOBUY from `nobuy_chain`.
    ChainOfOrigin,
    /// Sessions are drawn from their class chain, then the last symbol is
    /// overwritten: BUY sessions end with their first symbol, NOBUY sessions
    /// with a different one chosen uniformly. No bounded-order chain can see
    /// both ends of a session of length >= 10 at once.
    FirstEqualsLast,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub buy_chain: ChainSpec,
    pub nobuy_chain: ChainSpec,
    pub labeling: Labeling,
    pub length_dist: LengthDist,
    pub n_buy: usize,
    pub n_nobuy: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Distinct order-1 chains with a Bayes accuracy in the high 0.7s.
    SeparableMid,
    /// Strongly distinct order-1 chains.
    SeparableEasy,
    /// Both classes share one chain; chance level.
    Identical,
    /// The classes use disjoint symbol sets.
    Disjoint,
    /// Label is whether the first symbol equals the last.
    LongRange,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::SeparableMid,
        Preset::SeparableEasy,
        Preset::Identical,
        Preset::Disjoint,
        Preset::LongRange,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::SeparableMid => "separable-mid",
            Preset::SeparableEasy => "separable-easy",
            Preset::Identical => "identical",
            Preset::Disjoint => "disjoint",
            Preset::LongRange => "longrange",
        }
    }

    pub fn spec(self, n_buy: usize, n_nobuy: usize, seed: u64) -> GeneratorSpec {
        let (buy_chain, nobuy_chain, labeling, length_dist) = match self {
            Preset::SeparableMid => (
                ChainSpec {
                    initial: [0.40, 0.20, 0.30, 0.05, 0.05],
                    transitions: [
                        [0.35, 0.25, 0.25, 0.10, 0.05],
                        [0.30, 0.30, 0.25, 0.10, 0.05],
                        [0.30, 0.20, 0.25, 0.20, 0.05],
                        [0.35, 0.20, 0.25, 0.15, 0.05],
                        [0.35, 0.25, 0.25, 0.10, 0.05],
                    ],
                },
                ChainSpec {
                    initial: [0.50, 0.20, 0.20, 0.05, 0.05],
                    transitions: [
                        [0.40, 0.30, 0.20, 0.07, 0.03],
                        [0.35, 0.35, 0.20, 0.06, 0.04],
                        [0.40, 0.25, 0.20, 0.10, 0.05],
                        [0.35, 0.25, 0.20, 0.10, 0.10],
                        [0.40, 0.30, 0.20, 0.05, 0.05],
                    ],
                },
                Labeling::ChainOfOrigin,
                LengthDist::default(),
            ),
            Preset::SeparableEasy => (
                ChainSpec {
                    initial: [0.30, 0.10, 0.40, 0.10, 0.10],
                    transitions: [
                        [0.20, 0.10, 0.50, 0.15, 0.05],
                        [0.20, 0.10, 0.50, 0.15, 0.05],
                        [0.15, 0.05, 0.30, 0.45, 0.05],
                        [0.25, 0.05, 0.40, 0.20, 0.10],
                        [0.30, 0.10, 0.40, 0.15, 0.05],
                    ],
                },
                ChainSpec {
                    initial: [0.50, 0.30, 0.10, 0.05, 0.05],
                    transitions: [
                        [0.50, 0.35, 0.10, 0.03, 0.02],
                        [0.45, 0.40, 0.10, 0.03, 0.02],
                        [0.55, 0.30, 0.10, 0.03, 0.02],
                        [0.40, 0.30, 0.10, 0.05, 0.15],
                        [0.50, 0.35, 0.10, 0.03, 0.02],
                    ],
                },
                Labeling::ChainOfOrigin,
                LengthDist::default(),
            ),
            Preset::Identical => {
                let chain = ChainSpec::iid([0.3, 0.25, 0.2, 0.15, 0.1]);
                (chain.clone(), chain, Labeling::ChainOfOrigin, LengthDist::default())
            }
            Preset::Disjoint => (
                ChainSpec::iid([0.4, 0.0, 0.4, 0.2, 0.0]),
                ChainSpec::iid([0.0, 0.7, 0.0, 0.0, 0.3]),
                Labeling::ChainOfOrigin,
                LengthDist::default(),
            ),
            Preset::LongRange => {
                let chain = ChainSpec::iid([0.2; NUM_SYMBOLS]);
                (
                    chain.clone(),
                    chain,
                    Labeling::FirstEqualsLast,
                    LengthDist::Uniform { min: 10, max: 12 },
                )
            }
        };
        GeneratorSpec {
            buy_chain,
            nobuy_chain,
            labeling,
            length_dist,
            n_buy,
            n_nobuy,
            seed,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Spec(format!("unknown preset `{s}`")))
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        self.buy_chain.validate()?;
        self.nobuy_chain.validate()?;
        self.length_dist.validate()?;
        if self.n_buy + self.n_nobuy == 0 {
            return Err(Error::Spec("no sessions requested".into()));
        }
        Ok(())
    }

    /// Reads a `key = value` spec.
    ///
    /// Recognized keys: `preset` (default `separable-mid`), `n_buy`, `n_nobuy`,
    /// `seed`, `length_min`, `length_max`, `buy_initial`, `nobuy_initial`
    /// (five numbers), `buy_transitions`, `nobuy_transitions` (25 numbers,
    /// row-major). Numbers may be separated by spaces or commas.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let conf = Ini::load_from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let section = conf.general_section();
        let known = [
            "preset",
            "n_buy",
            "n_nobuy",
            "seed",
            "length_min",
            "length_max",
            "buy_initial",
            "nobuy_initial",
            "buy_transitions",
            "nobuy_transitions",
        ];
        if let Some((key, _)) = section.iter().find(|(k, _)| !known.contains(k)) {
            return Err(Error::Config(format!("unknown generator key `{key}`")));
        }
        let preset: Preset = section.get("preset").unwrap_or("separable-mid").parse()?;
        let parse_count = |key: &str, default: u64| -> Result<u64> {
            section.get(key).map_or(Ok(default), |v| {
                v.trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("`{key}` must be a non-negative integer")))
            })
        };
        let mut spec = preset.spec(
            parse_count("n_buy", 5000)? as usize,
            parse_count("n_nobuy", 5000)? as usize,
            parse_count("seed", 0)?,
        );
        if section.get("length_min").is_some() || section.get("length_max").is_some() {
            let support = spec.length_dist.support();
            let min = parse_count("length_min", support[0] as u64)? as usize;
            let max = parse_count("length_max", *support.last().unwrap() as u64)? as usize;
            spec.length_dist = LengthDist::Uniform { min, max };
        }
        for (prefix, chain) in [("buy", &mut spec.buy_chain), ("nobuy", &mut spec.nobuy_chain)] {
            if let Some(v) = section.get(format!("{prefix}_initial")) {
                let values = parse_numbers(v, NUM_SYMBOLS)?;
                chain.initial.copy_from_slice(&values);
            }
            if let Some(v) = section.get(format!("{prefix}_transitions")) {
                let values = parse_numbers(v, NUM_SYMBOLS * NUM_SYMBOLS)?;
                for (row, chunk) in chain.transitions.iter_mut().zip(values.chunks(NUM_SYMBOLS)) {
                    row.copy_from_slice(chunk);
                }
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn parse_numbers(text: &str, expected: usize) -> Result<Vec<f64>> {
    let values = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::Config(format!("cannot parse number `{t}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.len() != expected {
        return Err(Error::Config(format!(
            "expected {expected} numbers, found {}",
            values.len()
        )));
    }
    Ok(values)
}

/// Random stream for one session: the master seed keys the generator and
/// the session index selects the stream, so sessions can be drawn in any
/// order or in parallel with identical results.
fn session_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn generate_session(spec: &GeneratorSpec, index: usize, label: Label) -> LabeledSession {
    let mut rng = session_rng(spec.seed, index);
    let len = spec.length_dist.sample(&mut rng);
    let chain = match label {
        Label::Buy => &spec.buy_chain,
        Label::NoBuy => &spec.nobuy_chain,
    };
    let mut seq = chain.sample(len, &mut rng);
    if spec.labeling == Labeling::FirstEqualsLast {
        let first = seq[0];
        let last = seq.len() - 1;
        seq[last] = match label {
            Label::Buy => first,
            Label::NoBuy => {
                let offset = rng.gen_range(1..NUM_SYMBOLS);
                (first + offset) % NUM_SYMBOLS
            }
        };
    }
    let symbols = seq
        .into_iter()
        .map(|i| EventCategory::from_symbol_index(i).expect("index < NUM_SYMBOLS"))
        .collect();
    LabeledSession::new(symbols, label).expect("generated sessions never contain buy")
}

/// Draws `n_buy` BUY sessions followed by `n_nobuy` NOBUY sessions.
pub fn generate_dataset(spec: &GeneratorSpec) -> Result<Dataset> {
    spec.validate()?;
    let sessions = (0..spec.n_buy + spec.n_nobuy)
        .map(|i| {
            let label = if i < spec.n_buy { Label::Buy } else { Label::NoBuy };
            generate_session(spec, i, label)
        })
        .collect();
    Ok(Dataset::new(sessions, Provenance::Synthetic))
}

/// The classifier that knows the generating process.
#[derive(Debug, Clone)]
pub struct BayesOracle {
    labeling: Labeling,
    mixture: Mixture<ChainSpec>,
}

impl BayesOracle {
    pub fn new(spec: &GeneratorSpec) -> Result<Self> {
        spec.validate()?;
        let p_buy = spec.n_buy as f64 / (spec.n_buy + spec.n_nobuy) as f64;
        Ok(Self {
            labeling: spec.labeling,
            mixture: Mixture::new(
                spec.buy_chain.clone(),
                spec.nobuy_chain.clone(),
                Priors::from_buy_probability(p_buy),
            ),
        })
    }
}

impl Classifier for BayesOracle {
    fn predict(&self, symbols: &[EventCategory]) -> Result<Label> {
        match self.labeling {
            Labeling::ChainOfOrigin => {
                let (buy, nobuy) = self.mixture.scores(symbols)?;
                Ok(mixture_decision(buy, nobuy))
            }
            Labeling::FirstEqualsLast => match (symbols.first(), symbols.last()) {
                (Some(a), Some(b)) if a == b => Ok(Label::Buy),
                _ => Ok(Label::NoBuy),
            },
        }
    }
}

/// Accuracy of the true generating process (with the spec's class priors) on `data`.
pub fn bayes_optimal_accuracy(spec: &GeneratorSpec, data: &Dataset) -> Result<f64> {
    accuracy(&BayesOracle::new(spec)?, data)
}
