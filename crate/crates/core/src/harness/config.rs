use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::{Ini, Properties};

use super::model::ModelKind;
use super::split::{BalanceStrategy, SplitSpec};
use crate::classify::PriorMode;
use crate::error::{Error, Result};
use crate::lm::{LmValidationMetric, BATCH_SIZE_GRID, HIDDEN_GRID, LEARNING_RATE_GRID};
use crate::markov::DEFAULT_ALPHA;
use crate::neural::{EarlyStopping, NeuralTrainConfig};
use crate::session::EventCategory;
use crate::synthetic::{GeneratorSpec, Preset};
use crate::visibility::{CodeBook, SvmConfig, VgConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    /// Prepared TSV.
    File(PathBuf),
    Synthetic(GeneratorSpec),
}

/// Cartesian hyperparameter grid for an LSTM model.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralGrid {
    pub hidden: Vec<usize>,
    pub learning_rate: Vec<f64>,
    pub batch_size: Vec<usize>,
    pub clip_norm: Option<f64>,
}

impl Default for NeuralGrid {
    fn default() -> Self {
        Self {
            hidden: HIDDEN_GRID.to_vec(),
            learning_rate: LEARNING_RATE_GRID.to_vec(),
            batch_size: BATCH_SIZE_GRID.to_vec(),
            clip_norm: None,
        }
    }
}

impl NeuralGrid {
    /// Points in (hidden, learning rate, batch size) lexicographic order.
    pub fn points(&self, early_stopping: EarlyStopping, seed: u64) -> Vec<NeuralTrainConfig> {
        let mut out = Vec::new();
        for &hidden in &self.hidden {
            for &learning_rate in &self.learning_rate {
                for &batch_size in &self.batch_size {
                    out.push(NeuralTrainConfig {
                        hidden,
                        learning_rate,
                        batch_size,
                        seed,
                        early_stopping,
                        clip_norm: self.clip_norm,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovSection {
    pub orders: Vec<usize>,
    pub alpha: f64,
}

impl Default for MarkovSection {
    fn default() -> Self {
        Self {
            orders: (1..=6).collect(),
            alpha: DEFAULT_ALPHA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LmSection {
    pub grid: NeuralGrid,
    /// Early-stopping metric; the grid winner is always picked by mixture accuracy.
    pub metric: LmValidationMetric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VgSection {
    pub k: Vec<usize>,
    pub codebooks: Vec<CodeBook>,
    pub c: Vec<f64>,
    pub variance_target: f64,
    pub iterations: usize,
    pub window: usize,
    pub value_range: usize,
}

impl Default for VgSection {
    fn default() -> Self {
        let base = VgConfig::default();
        Self {
            k: vec![base.k],
            codebooks: vec![base.codebook],
            c: vec![base.svm.c],
            variance_target: base.variance_target,
            iterations: base.svm.iterations,
            window: base.window,
            value_range: base.value_range,
        }
    }
}

impl VgSection {
    /// Points in (code-book, k, C) order.
    pub fn points(&self) -> Vec<VgConfig> {
        let mut out = Vec::new();
        for &codebook in &self.codebooks {
            for &k in &self.k {
                for &c in &self.c {
                    out.push(VgConfig {
                        k,
                        codebook,
                        window: self.window,
                        value_range: self.value_range,
                        variance_target: self.variance_target,
                        svm: SvmConfig {
                            c,
                            iterations: self.iterations,
                        },
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub seed: u64,
    /// Repetitions for seed-dependent models; one-shot models always run once.
    pub runs: usize,
    pub models: Vec<ModelKind>,
    pub balance: BalanceStrategy,
    pub split: SplitSpec,
    pub early_stopping: EarlyStopping,
    pub priors: PriorMode,
    pub data: Option<DataSource>,
    pub markov: MarkovSection,
    pub lm: LmSection,
    pub vg: VgSection,
    pub s2l: NeuralGrid,
    /// Adds wall-clock timestamps to the JSON report; off keeps reports reproducible.
    pub timestamps: bool,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            runs: 10,
            models: ModelKind::ALL.to_vec(),
            balance: BalanceStrategy::Downsample,
            split: SplitSpec::default(),
            early_stopping: EarlyStopping::default(),
            priors: PriorMode::Empirical,
            data: None,
            markov: MarkovSection::default(),
            lm: LmSection::default(),
            vg: VgSection::default(),
            s2l: NeuralGrid::default(),
            timestamps: false,
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn check_keys(section: &str, props: &Properties, known: &[&str]) -> Result<()> {
    match props.iter().find(|(k, _)| !known.contains(k)) {
        Some((k, _)) => Err(config_err(format!("unknown key `{k}` in [{section}]"))),
        None => Ok(()),
    }
}

fn parse_one<T: FromStr>(props: &Properties, key: &str, default: T) -> Result<T> {
    match props.get(key) {
        None => Ok(default),
        Some(v) => v
            .trim()
            .parse()
            .map_err(|_| config_err(format!("cannot parse `{key} = {v}`"))),
    }
}

fn parse_list<T: FromStr>(props: &Properties, key: &str, default: Vec<T>) -> Result<Vec<T>> {
    let Some(v) = props.get(key) else {
        return Ok(default);
    };
    let items = v
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| config_err(format!("cannot parse `{t}` in `{key}`"))))
        .collect::<Result<Vec<T>>>()?;
    if items.is_empty() {
        return Err(config_err(format!("`{key}` is empty")));
    }
    Ok(items)
}

fn parse_bool(props: &Properties, key: &str, default: bool) -> Result<bool> {
    match props.get(key).map(str::trim) {
        None => Ok(default),
        Some("true" | "yes" | "on" | "1") => Ok(true),
        Some("false" | "no" | "off" | "0") => Ok(false),
        Some(v) => Err(config_err(format!("`{key}` must be a boolean, got `{v}`"))),
    }
}

fn parse_grid(section: &str, props: &Properties, extra: &[&str]) -> Result<NeuralGrid> {
    let mut known = vec!["hidden", "learning_rate", "batch_size", "clip_norm"];
    known.extend_from_slice(extra);
    check_keys(section, props, &known)?;
    let base = NeuralGrid::default();
    let grid = NeuralGrid {
        hidden: parse_list(props, "hidden", base.hidden)?,
        learning_rate: parse_list(props, "learning_rate", base.learning_rate)?,
        batch_size: parse_list(props, "batch_size", base.batch_size)?,
        clip_norm: match props.get("clip_norm") {
            None => None,
            Some(v) => Some(v.trim().parse().map_err(|_| config_err("bad `clip_norm`"))?),
        },
    };
    if grid.hidden.contains(&0) || grid.batch_size.contains(&0) || grid.learning_rate.iter().any(|&l| !(l > 0.0)) {
        return Err(config_err(format!("[{section}] grid values must be positive")));
    }
    Ok(grid)
}

fn parse_codebook(text: &str) -> Result<CodeBook> {
    let order = text
        .split(':')
        .map(|t| t.trim().parse::<EventCategory>())
        .collect::<Result<Vec<_>>>()?;
    CodeBook::from_order(&order)
}

impl BenchmarkConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str_with_base(&text, path.parent())
    }

    /// Relative data paths resolve against `base`.
    pub fn from_str_with_base(text: &str, base: Option<&Path>) -> Result<Self> {
        let conf = Ini::load_from_str(text).map_err(|e| config_err(e.to_string()))?;
        let mut cfg = Self::default();
        for (name, props) in conf.iter() {
            match name {
                None => {
                    if !props.is_empty() {
                        return Err(config_err("keys must live under a [section]"));
                    }
                }
                Some("benchmark") => cfg.read_benchmark(props)?,
                Some("data") => cfg.data = Some(read_data(props, base)?),
                Some("markov") => {
                    check_keys("markov", props, &["orders", "alpha"])?;
                    let base = MarkovSection::default();
                    cfg.markov = MarkovSection {
                        orders: parse_list(props, "orders", base.orders)?,
                        alpha: parse_one(props, "alpha", base.alpha)?,
                    };
                }
                Some("lm") => {
                    cfg.lm = LmSection {
                        grid: parse_grid("lm", props, &["metric"])?,
                        metric: parse_one(props, "metric", LmValidationMetric::default())?,
                    }
                }
                Some("vg") => {
                    check_keys(
                        "vg",
                        props,
                        &["k", "codebooks", "c", "variance_target", "iterations", "window", "value_range"],
                    )?;
                    let base = VgSection::default();
                    let codebooks = match props.get("codebooks") {
                        None => base.codebooks,
                        Some(v) => v.split(',').map(parse_codebook).collect::<Result<_>>()?,
                    };
                    cfg.vg = VgSection {
                        k: parse_list(props, "k", base.k)?,
                        codebooks,
                        c: parse_list(props, "c", base.c)?,
                        variance_target: parse_one(props, "variance_target", base.variance_target)?,
                        iterations: parse_one(props, "iterations", base.iterations)?,
                        window: parse_one(props, "window", base.window)?,
                        value_range: parse_one(props, "value_range", base.value_range)?,
                    };
                }
                Some("s2l") => cfg.s2l = parse_grid("s2l", props, &[])?,
                Some(other) => return Err(config_err(format!("unknown section [{other}]"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn read_benchmark(&mut self, props: &Properties) -> Result<()> {
        check_keys(
            "benchmark",
            props,
            &[
                "seed", "runs", "models", "balance", "train", "val", "test", "stratified", "patience",
                "max_epochs", "priors", "timestamps",
            ],
        )?;
        self.seed = parse_one(props, "seed", self.seed)?;
        self.runs = parse_one(props, "runs", self.runs)?;
        self.models = parse_list(props, "models", self.models.clone())?;
        self.balance = parse_one(props, "balance", self.balance)?;
        self.split.train = parse_one(props, "train", self.split.train)?;
        self.split.val = parse_one(props, "val", self.split.val)?;
        self.split.test = parse_one(props, "test", self.split.test)?;
        self.split.stratified = parse_bool(props, "stratified", self.split.stratified)?;
        self.early_stopping.patience = parse_one(props, "patience", self.early_stopping.patience)?;
        self.early_stopping.max_epochs = parse_one(props, "max_epochs", self.early_stopping.max_epochs)?;
        self.priors = parse_one(props, "priors", self.priors)?;
        self.timestamps = parse_bool(props, "timestamps", self.timestamps)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(config_err("`runs` must be at least 1"));
        }
        if self.models.is_empty() {
            return Err(config_err("no models selected"));
        }
        if self.early_stopping.max_epochs == 0 {
            return Err(config_err("`max_epochs` must be at least 1"));
        }
        SplitSpec { seed: self.seed, ..self.split }.validate()?;
        if self.markov.orders.is_empty() || !(self.markov.alpha > 0.0) {
            return Err(config_err("[markov] needs orders and alpha > 0"));
        }
        if self.vg.k.contains(&0) || self.vg.c.iter().any(|&c| !(c > 0.0)) || self.vg.iterations == 0 {
            return Err(config_err("[vg] needs k >= 1, C > 0 and iterations >= 1"));
        }
        Ok(())
    }

    /// Split spec seeded from the master seed.
    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            seed: self.seed,
            ..self.split
        }
    }
}

fn read_data(props: &Properties, base: Option<&Path>) -> Result<DataSource> {
    if let Some(path) = props.get("path") {
        check_keys("data", props, &["path"])?;
        let path = PathBuf::from(path.trim());
        let path = match base {
            Some(dir) if path.is_relative() => dir.join(path),
            _ => path,
        };
        return Ok(DataSource::File(path));
    }
    check_keys("data", props, &["preset", "n_buy", "n_nobuy", "seed"])?;
    let preset: Preset = parse_one(props, "preset", Preset::SeparableMid)?;
    let spec = preset.spec(
        parse_one(props, "n_buy", 1000)?,
        parse_one(props, "n_nobuy", 1000)?,
        parse_one(props, "seed", 0)?,
    );
    spec.validate()?;
    Ok(DataSource::Synthetic(spec))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_protocol() {
        let cfg = BenchmarkConfig::from_str_with_base("", None).unwrap();
        assert_eq!(cfg.runs, 10);
        assert_eq!(cfg.models, ModelKind::ALL.to_vec());
        assert_eq!(cfg.lm.grid.points(cfg.early_stopping, 0).len(), 24);
        assert_eq!(cfg.early_stopping, EarlyStopping { patience: 10, max_epochs: 50 });
        assert!(!cfg.timestamps);
    }

    #[test]
    fn sections_parse() {
        let text = "\
[benchmark]
seed = 42
runs = 3
models = markov, s2l-last
balance = none

[data]
path = sessions.tsv

[markov]
orders = 1, 5

[lm]
hidden = 10
metric = mixture

[vg]
k = 1, 2
codebooks = view:click:detail:add-to-cart:remove-from-cart, detail:view:click:remove-from-cart:add-to-cart

[s2l]
hidden = 8, 16
learning_rate = 0.01
batch_size = 20
";
        let cfg = BenchmarkConfig::from_str_with_base(text, Some(Path::new("/data"))).unwrap();
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.models, vec![ModelKind::Markov, ModelKind::S2lLast]);
        assert_eq!(cfg.balance, BalanceStrategy::None);
        assert_eq!(cfg.data, Some(DataSource::File(PathBuf::from("/data/sessions.tsv"))));
        assert_eq!(cfg.markov.orders, vec![1, 5]);
        assert_eq!(cfg.lm.metric, LmValidationMetric::MixtureAccuracy);
        assert_eq!(cfg.vg.points().len(), 4);
        assert_eq!(cfg.s2l.points(cfg.early_stopping, 1).len(), 2);
    }

    #[test]
    fn synthetic_source() {
        let cfg = BenchmarkConfig::from_str_with_base("[data]\npreset = longrange\nn_buy = 5\nn_nobuy = 6\n", None).unwrap();
        match cfg.data {
            Some(DataSource::Synthetic(spec)) => assert_eq!((spec.n_buy, spec.n_nobuy), (5, 6)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        for text in [
            "[nope]\nx = 1\n",
            "[benchmark]\nbogus = 1\n",
            "[benchmark]\nruns = 0\n",
            "[benchmark]\nmodels = svm\n",
            "[benchmark]\ntrain = 0.9\n",
            "[lm]\nhidden = 0\n",
            "x = 1\n",
        ] {
            assert!(BenchmarkConfig::from_str_with_base(text, None).is_err(), "{text}");
        }
    }
}
