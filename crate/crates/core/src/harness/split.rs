use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::session::{Dataset, Label, LabeledSession};

// ChaCha stream ids, so the split and the balancing never share a generator.
const SPLIT_STREAM: u64 = 100;
const BALANCE_STREAM: u64 = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub stratified: bool,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 0.70,
            val: 0.15,
            test: 0.15,
            stratified: true,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let ratios = [self.train, self.val, self.test];
        if ratios.iter().any(|&r| !(r > 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Split(format!(
                "ratios must be positive and sum to 1, got {}/{}/{}",
                self.train, self.val, self.test
            )));
        }
        Ok(())
    }

    /// Sizes of the three parts of a group of `n` items.
    fn cut(&self, n: usize) -> (usize, usize) {
        let n_train = (self.train * n as f64).round() as usize;
        let n_val = ((self.val * n as f64).round() as usize).min(n - n_train.min(n));
        (n_train.min(n), n_val)
    }
}

fn shuffled(mut idx: Vec<usize>, rng: &mut ChaCha8Rng) -> Vec<usize> {
    idx.shuffle(rng);
    idx
}

fn take(data: &Dataset, mut idx: Vec<usize>) -> Dataset {
    idx.sort_unstable();
    let sessions: Vec<LabeledSession> = idx.into_iter().map(|i| data.sessions[i].clone()).collect();
    Dataset::new(sessions, data.provenance)
}

/// Deterministic train / validation / test partition; each part keeps the input order.
pub fn split(data: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(SPLIT_STREAM);
    let groups: Vec<Vec<usize>> = if spec.stratified {
        [Label::Buy, Label::NoBuy]
            .iter()
            .map(|&l| (0..data.len()).filter(|&i| data.sessions[i].label() == l).collect())
            .collect()
    } else {
        vec![(0..data.len()).collect()]
    };
    let (mut tr, mut va, mut te) = (Vec::new(), Vec::new(), Vec::new());
    for group in groups {
        let n = group.len();
        let (n_train, n_val) = spec.cut(n);
        if spec.stratified && (n_train == 0 || n_val == 0 || n_train + n_val == n) {
            return Err(Error::Split(format!(
                "class with {n} sessions cannot fill every stratified split"
            )));
        }
        let order = shuffled(group, &mut rng);
        tr.extend_from_slice(&order[..n_train]);
        va.extend_from_slice(&order[n_train..n_train + n_val]);
        te.extend_from_slice(&order[n_train + n_val..]);
    }
    if tr.is_empty() || va.is_empty() || te.is_empty() {
        return Err(Error::Split(format!("{} sessions cannot fill three splits", data.len())));
    }
    Ok((take(data, tr), take(data, va), take(data, te)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BalanceStrategy {
    #[default]
    Downsample,
    None,
}

impl BalanceStrategy {
    pub fn name(self) -> &'static str {
        match self {
            BalanceStrategy::Downsample => "downsample",
            BalanceStrategy::None => "none",
        }
    }
}

impl std::str::FromStr for BalanceStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "downsample" => Ok(Self::Downsample),
            "none" => Ok(Self::None),
            other => Err(Error::Config(format!("unknown balance strategy `{other}`"))),
        }
    }
}

/// Downsampling subsamples the larger class, without replacement, to the size of the smaller.
pub fn balance(data: &Dataset, strategy: BalanceStrategy, seed: u64) -> Result<Dataset> {
    let n_buy = data.count(Label::Buy);
    let n_nobuy = data.count(Label::NoBuy);
    if n_buy == 0 || n_nobuy == 0 {
        return Err(Error::Split("balancing needs both classes".into()));
    }
    if strategy == BalanceStrategy::None || n_buy == n_nobuy {
        return Ok(data.clone());
    }
    let (major, target) = if n_nobuy > n_buy {
        (Label::NoBuy, n_buy)
    } else {
        (Label::Buy, n_nobuy)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(BALANCE_STREAM);
    let major_idx: Vec<usize> = (0..data.len()).filter(|&i| data.sessions[i].label() == major).collect();
    let mut keep: Vec<usize> = (0..data.len()).filter(|&i| data.sessions[i].label() != major).collect();
    keep.extend(sample(&mut rng, major_idx.len(), target).into_iter().map(|j| major_idx[j]));
    Ok(take(data, keep))
}
