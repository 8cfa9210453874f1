use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::BenchmarkConfig;
use super::model::{evaluate, run_training, Hyperparams, ModelKind};
use super::split::{balance, split};
use crate::error::{Error, Result};
use crate::neural::TrainingCurve;
use crate::seq2label::Pooling;
use crate::session::Dataset;

/// SHA-256 of the dataset's TSV serialization.
pub fn dataset_fingerprint(data: &Dataset) -> String {
    hex::encode(Sha256::digest(data.to_tsv_string().as_bytes()))
}

/// Training seed of repetition `run`; grid search uses the master seed itself.
fn run_seed(master: u64, run: usize) -> u64 {
    master.wrapping_add(1 + run as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub hyperparameters: String,
    pub hidden: Option<usize>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: usize,
    pub train_loss: Option<f64>,
    pub metric: f64,
    pub best_so_far: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRecord {
    pub name: String,
    pub best_epoch: usize,
    pub stop_reason: String,
    pub epochs: Vec<EpochRow>,
}

impl CurveRecord {
    fn new(name: &str, curve: &TrainingCurve) -> Self {
        Self {
            name: name.to_string(),
            best_epoch: curve.best_epoch,
            stop_reason: curve.stop_reason.as_str().to_string(),
            epochs: curve
                .records
                .iter()
                .map(|r| EpochRow {
                    epoch: r.epoch,
                    train_loss: r.train_loss.is_finite().then_some(r.train_loss),
                    metric: r.metric,
                    best_so_far: r.best_so_far,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
    pub curves: Vec<CurveRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub key: String,
    pub name: String,
    pub mean: Option<f64>,
    /// Sample standard deviation; absent for a single run.
    pub std: Option<f64>,
    pub hyperparameters: String,
    pub failure: Option<String>,
    pub grid: Vec<GridPoint>,
    pub runs: Vec<RunRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub fingerprint: String,
    pub master_seed: u64,
    pub balance: String,
    pub sessions: usize,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub started_at: Option<String>,
    pub finished_at: Option<String>,
    pub rows: Vec<ModelRow>,
}

fn mean_std(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.len() > 1)
        .then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (mean, std)
}

fn grid_for(kind: ModelKind, cfg: &BenchmarkConfig) -> Vec<Hyperparams> {
    let es = cfg.early_stopping;
    match kind {
        ModelKind::Markov => {
            let mut orders = cfg.markov.orders.clone();
            orders.sort_unstable();
            orders.dedup();
            orders
                .into_iter()
                .map(|order| Hyperparams::Markov {
                    order,
                    alpha: cfg.markov.alpha,
                })
                .collect()
        }
        ModelKind::LanguageModel => cfg
            .lm
            .grid
            .points(es, cfg.seed)
            .into_iter()
            .map(|train| Hyperparams::Lm {
                train,
                metric: cfg.lm.metric,
            })
            .collect(),
        ModelKind::VisibilityGraph => cfg.vg.points().into_iter().map(Hyperparams::Vg).collect(),
        ModelKind::S2lAvg | ModelKind::S2lLast => {
            let pooling = if kind == ModelKind::S2lAvg { Pooling::Avg } else { Pooling::Last };
            cfg.s2l
                .points(es, cfg.seed)
                .into_iter()
                .map(|train| Hyperparams::S2l { train, pooling })
                .collect()
        }
    }
}

fn grid_point(hp: &Hyperparams, val_accuracy: f64) -> GridPoint {
    let train = match hp {
        Hyperparams::Lm { train, .. } | Hyperparams::S2l { train, .. } => Some(train),
        _ => None,
    };
    GridPoint {
        hyperparameters: hp.describe(),
        hidden: train.map(|t| t.hidden),
        learning_rate: train.map(|t| t.learning_rate),
        batch_size: train.map(|t| t.batch_size),
        val_accuracy,
    }
}

struct Splits {
    train: Dataset,
    val: Dataset,
    test: Dataset,
}

fn run_model(kind: ModelKind, cfg: &BenchmarkConfig, data: &Splits) -> Result<(String, Vec<GridPoint>, Vec<RunRecord>)> {
    let candidates = grid_for(kind, cfg);
    let results: Vec<f64> = candidates
        .par_iter()
        .map(|hp| run_training(hp, &data.train, &data.val, cfg.priors).map(|r| r.val_accuracy))
        .collect::<Result<_>>()?;
    // Highest validation accuracy; ties keep the earlier grid point.
    let best = results
        .iter()
        .enumerate()
        .fold(0, |best, (i, &acc)| if acc > results[best] { i } else { best });
    let grid = candidates.iter().zip(&results).map(|(hp, &a)| grid_point(hp, a)).collect();
    let winner = &candidates[best];

    let n_runs = if kind.seed_dependent() { cfg.runs } else { 1 };
    let runs = (0..n_runs)
        .into_par_iter()
        .map(|run| {
            let seed = run_seed(cfg.seed, run);
            let trained = run_training(&winner.with_seed(seed), &data.train, &data.val, cfg.priors)?;
            Ok(RunRecord {
                run,
                seed,
                val_accuracy: trained.val_accuracy,
                test_accuracy: evaluate(&trained.model, &data.test)?,
                curves: trained.curves.iter().map(|(n, c)| CurveRecord::new(n, c)).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((winner.describe(), grid, runs))
}

/// Balances, splits, grid-searches every selected model on validation accuracy,
/// then repeats the winner with per-run seeds and scores it on the test split.
pub fn benchmark(data: &Dataset, cfg: &BenchmarkConfig) -> Result<BenchmarkReport> {
    cfg.validate()?;
    let started_at = cfg.timestamps.then(|| chrono::Utc::now().to_rfc3339());
    let balanced = balance(data, cfg.balance, cfg.seed)?;
    let (train, val, test) = split(&balanced, &cfg.split_spec())?;
    let splits = Splits { train, val, test };

    let mut kinds = cfg.models.clone();
    kinds.sort_unstable();
    kinds.dedup();
    let rows = kinds
        .par_iter()
        .map(|&kind| match run_model(kind, cfg, &splits) {
            Ok((hyperparameters, grid, runs)) => {
                let accs: Vec<f64> = runs.iter().map(|r| r.test_accuracy).collect();
                let (mean, std) = mean_std(&accs);
                ModelRow {
                    key: kind.key().to_string(),
                    name: kind.display_name().to_string(),
                    mean: Some(mean),
                    std,
                    hyperparameters,
                    failure: None,
                    grid,
                    runs,
                }
            }
            Err(e) => ModelRow {
                key: kind.key().to_string(),
                name: kind.display_name().to_string(),
                mean: None,
                std: None,
                hyperparameters: String::new(),
                failure: Some(e.to_string()),
                grid: Vec::new(),
                runs: Vec::new(),
            },
        })
        .collect();

    Ok(BenchmarkReport {
        fingerprint: dataset_fingerprint(data),
        master_seed: cfg.seed,
        balance: cfg.balance.name().to_string(),
        sessions: balanced.len(),
        train: splits.train.len(),
        val: splits.val.len(),
        test: splits.test.len(),
        started_at,
        finished_at: cfg.timestamps.then(|| chrono::Utc::now().to_rfc3339()),
        rows,
    })
}

fn csv_field(text: &str) -> String {
    if text.contains([',', '"', '\n']) {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl BenchmarkReport {
    pub fn row(&self, kind: ModelKind) -> Option<&ModelRow> {
        self.rows.iter().find(|r| r.key == kind.key())
    }

    /// One line per model; no timestamps, so equal inputs give equal bytes.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,mean_accuracy,std,runs,hyperparameters,status\n");
        for r in &self.rows {
            let status = r.failure.as_deref().map_or("ok".to_string(), |e| format!("failed: {e}"));
            writeln!(
                out,
                "{},{},{},{},{},{}",
                csv_field(&r.name),
                opt(r.mean),
                opt(r.std),
                r.runs.len(),
                csv_field(&r.hyperparameters),
                csv_field(&status)
            )
            .unwrap();
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Model | Accuracy | Runs | Hyperparameters |\n|---|---|---|---|\n");
        for r in &self.rows {
            let acc = match (r.mean, r.std, &r.failure) {
                (_, _, Some(e)) => format!("failed ({e})"),
                (Some(m), Some(s), None) => format!("{m:.3} (±{s:.3})"),
                (Some(m), None, None) => format!("{m:.3}"),
                (None, _, None) => "n/a".to_string(),
            };
            writeln!(out, "| {} | {} | {} | {} |", r.name, acc, r.runs.len(), r.hyperparameters).unwrap();
        }
        writeln!(out).unwrap();
        writeln!(out, "- dataset sha256: `{}`", self.fingerprint).unwrap();
        writeln!(out, "- master seed: {}", self.master_seed).unwrap();
        writeln!(
            out,
            "- balance: {} ({} sessions; train {}, val {}, test {})",
            self.balance, self.sessions, self.train, self.val, self.test
        )
        .unwrap();
        if let (Some(a), Some(b)) = (&self.started_at, &self.finished_at) {
            writeln!(out, "- started {a}, finished {b}").unwrap();
        }
        out
    }

    pub fn curves_csv(&self) -> String {
        let mut out =
            String::from("model,run,seed,curve,epoch,train_loss,metric,best_so_far,best_epoch,stop_reason\n");
        for r in &self.rows {
            for run in &r.runs {
                for c in &run.curves {
                    for e in &c.epochs {
                        writeln!(
                            out,
                            "{},{},{},{},{},{},{},{},{},{}",
                            r.key,
                            run.run,
                            run.seed,
                            c.name,
                            e.epoch,
                            opt(e.train_loss),
                            e.metric,
                            e.best_so_far,
                            c.best_epoch,
                            c.stop_reason
                        )
                        .unwrap();
                    }
                }
            }
        }
        out
    }

    pub fn grid_csv(&self) -> String {
        let mut out = String::from("model,hyperparameters,val_accuracy\n");
        for r in &self.rows {
            for g in &r.grid {
                writeln!(out, "{},{},{}", r.key, csv_field(&g.hyperparameters), g.val_accuracy).unwrap();
            }
        }
        out
    }

    /// `(hidden, lr, batch, val_metric)` for the language-model grid.
    pub fn lm_grid_csv(&self) -> String {
        let mut out = String::from("hidden,lr,batch,val_metric\n");
        if let Some(row) = self.row(ModelKind::LanguageModel) {
            for g in &row.grid {
                writeln!(
                    out,
                    "{},{},{},{}",
                    g.hidden.unwrap_or_default(),
                    g.learning_rate.unwrap_or_default(),
                    g.batch_size.unwrap_or_default(),
                    g.val_accuracy
                )
                .unwrap();
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Input(format!("malformed report: {e}")))
    }

    /// Rows in report order, `runs` repetitions for seed-dependent models and one otherwise.
    pub fn check_shape(&self, runs: usize) -> Result<()> {
        let mut last = None;
        for r in &self.rows {
            let kind: ModelKind = r.key.parse()?;
            if last.is_some_and(|l| l >= kind) {
                return Err(Error::Input("rows out of order".into()));
            }
            last = Some(kind);
            if r.failure.is_none() {
                let expected = if kind.seed_dependent() { runs } else { 1 };
                if r.runs.len() != expected || r.std.is_some() != (expected > 1) {
                    return Err(Error::Input(format!("row `{}` breaks the run contract", r.name)));
                }
            }
        }
        Ok(())
    }
}
