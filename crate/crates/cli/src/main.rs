use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use clickstream_core::harness::{
    benchmark, evaluate, run_training, BenchmarkConfig, BenchmarkReport, DataSource, Hyperparams, ModelKind,
    TrainedModel,
};
use clickstream_core::lm::LmValidationMetric;
use clickstream_core::markov::{DEFAULT_ALPHA, DEFAULT_ORDER};
use clickstream_core::neural::{EarlyStopping, NeuralTrainConfig};
use clickstream_core::seq2label::Pooling;
use clickstream_core::session::{prepare, PrepareConfig, MAX_SESSION_LEN, MIN_SESSION_LEN, SESSION_GAP_MINUTES};
use clickstream_core::synthetic::{bayes_optimal_accuracy, generate_dataset, GeneratorSpec, Preset};
use clickstream_core::visibility::{SvmConfig, VgConfig};
use clickstream_core::{Dataset, Error, PriorMode, Provenance};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_TRAINING: u8 = 3;

#[derive(Parser)]
#[command(name = "clickstream", version, about = "Purchase-intent benchmark on symbolized clickstreams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a labeled synthetic dataset as prepared TSV.
    Generate(GenerateArgs),
    /// Turn raw JSONL events into prepared TSV sessions.
    Prepare(PrepareArgs),
    /// Fit one model and write it to a file.
    Train(TrainArgs),
    /// Accuracy of a saved model on a prepared TSV file.
    Evaluate(EvaluateArgs),
    /// Run the full split / grid search / repeated-run protocol.
    Benchmark(BenchmarkArgs),
    /// Render a saved JSON report as Markdown or CSV.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value = "separable-mid")]
    preset: String,
    #[arg(long, default_value_t = 5000)]
    n_buy: usize,
    #[arg(long, default_value_t = 5000)]
    n_nobuy: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Generator config file (`key = value`); overrides the preset flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path; stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Print the Bayes-optimal accuracy on the sample to stderr.
    #[arg(long)]
    oracle: bool,
}

#[derive(Args)]
struct PrepareArgs {
    /// JSONL events with `session_user`, `ts` and `type`.
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = SESSION_GAP_MINUTES)]
    gap_minutes: i64,
    #[arg(long, default_value_t = MIN_SESSION_LEN)]
    min_len: usize,
    #[arg(long, default_value_t = MAX_SESSION_LEN)]
    max_len: usize,
}

#[derive(Args)]
struct TrainArgs {
    /// markov, lm, vg, s2l-avg or s2l-last.
    #[arg(long)]
    model: String,
    #[arg(long)]
    train: PathBuf,
    /// Validation set for early stopping and the reported validation accuracy.
    #[arg(long)]
    val: PathBuf,
    #[arg(long, short)]
    out: PathBuf,
    /// Optional CSV of the validation curve(s).
    #[arg(long)]
    curve: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "empirical")]
    priors: String,
    #[arg(long, default_value_t = DEFAULT_ORDER)]
    order: usize,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = 20)]
    hidden: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 20)]
    batch: usize,
    #[arg(long, default_value_t = 10)]
    patience: usize,
    #[arg(long, default_value_t = 50)]
    max_epochs: usize,
    #[arg(long)]
    clip_norm: Option<f64>,
    /// LM early-stopping metric: token or mixture.
    #[arg(long, default_value = "token")]
    metric: String,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 0.95)]
    variance: f64,
    #[arg(long, default_value_t = 1000)]
    svm_iterations: usize,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long, short)]
    model: PathBuf,
    #[arg(long, short)]
    data: PathBuf,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Benchmark config with [benchmark], [data], [markov], [lm], [vg] and [s2l] sections.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Prepared TSV; overrides the config's [data] section.
    #[arg(long, short)]
    data: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    /// Directory for report.{csv,md,json}, curves.csv, grid.csv and lm_grid.csv.
    #[arg(long, short)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// report.json written by `benchmark`.
    #[arg(long, short)]
    input: PathBuf,
    /// markdown or csv.
    #[arg(long, default_value = "markdown")]
    format: String,
}

/// Failure tagged with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) => EXIT_USAGE,
            Error::Fit(_) | Error::Numeric(_) => EXIT_TRAINING,
            _ => EXIT_DATA,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Error::from(e).into()
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn read_dataset(path: &Path) -> Result<Dataset, Failure> {
    let file = File::open(path).map_err(|e| Failure {
        code: EXIT_DATA,
        message: format!("{}: {e}", path.display()),
    })?;
    Ok(Dataset::read_tsv(BufReader::new(file), Provenance::Ingested)?)
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn cmd_generate(args: GenerateArgs) -> Result<(), Failure> {
    let spec = match &args.config {
        Some(path) => GeneratorSpec::from_config_str(&fs::read_to_string(path)?)?,
        None => {
            let preset: Preset = args.preset.parse().map_err(|e: Error| usage(e.to_string()))?;
            preset.spec(args.n_buy, args.n_nobuy, args.seed)
        }
    };
    let data = generate_dataset(&spec)?;
    match &args.out {
        Some(p) => data.write_tsv(BufWriter::new(File::create(p)?))?,
        None => data.write_tsv(BufWriter::new(io::stdout().lock()))?,
    }
    if args.oracle {
        eprintln!("bayes-optimal accuracy: {}", bayes_optimal_accuracy(&spec, &data)?);
    }
    Ok(())
}

fn cmd_prepare(args: PrepareArgs) -> Result<(), Failure> {
    let config = PrepareConfig {
        min_len: args.min_len,
        max_len: args.max_len,
        ..PrepareConfig::default()
    }
    .with_gap_minutes(args.gap_minutes);
    let (data, stats) = prepare(BufReader::new(File::open(&args.input)?), &config)?;
    write_output(args.out.as_deref(), &data.to_tsv_string())?;
    eprintln!(
        "events {} users {} sessions {} kept {} too-short {} too-long {}",
        stats.events, stats.users, stats.raw_sessions, stats.filter.kept, stats.filter.too_short, stats.filter.too_long
    );
    Ok(())
}

fn train_hyperparams(args: &TrainArgs) -> Result<Hyperparams, Failure> {
    let kind: ModelKind = args.model.parse().map_err(|e: Error| usage(e.to_string()))?;
    let neural = NeuralTrainConfig {
        hidden: args.hidden,
        learning_rate: args.lr,
        batch_size: args.batch,
        seed: args.seed,
        early_stopping: EarlyStopping {
            patience: args.patience,
            max_epochs: args.max_epochs,
        },
        clip_norm: args.clip_norm,
    };
    Ok(match kind {
        ModelKind::Markov => Hyperparams::Markov {
            order: args.order,
            alpha: args.alpha,
        },
        ModelKind::LanguageModel => Hyperparams::Lm {
            train: neural,
            metric: args
                .metric
                .parse::<LmValidationMetric>()
                .map_err(|e| usage(e.to_string()))?,
        },
        ModelKind::VisibilityGraph => Hyperparams::Vg(VgConfig {
            k: args.k,
            variance_target: args.variance,
            svm: SvmConfig {
                c: args.c,
                iterations: args.svm_iterations,
            },
            ..VgConfig::default()
        }),
        ModelKind::S2lAvg => Hyperparams::S2l {
            train: neural,
            pooling: Pooling::Avg,
        },
        ModelKind::S2lLast => Hyperparams::S2l {
            train: neural,
            pooling: Pooling::Last,
        },
    })
}

fn cmd_train(args: TrainArgs) -> Result<(), Failure> {
    let hp = train_hyperparams(&args)?;
    let priors: PriorMode = args.priors.parse().map_err(|e: Error| usage(e.to_string()))?;
    let train = read_dataset(&args.train)?;
    let val = read_dataset(&args.val)?;
    let run = run_training(&hp, &train, &val, priors)?;
    fs::write(&args.out, run.model.to_text())?;
    if let Some(path) = &args.curve {
        let mut out = String::from("curve,epoch,train_loss,metric,best_so_far\n");
        for (name, curve) in &run.curves {
            for r in &curve.records {
                let loss = if r.train_loss.is_finite() { r.train_loss.to_string() } else { String::new() };
                out.push_str(&format!("{name},{},{loss},{},{}\n", r.epoch, r.metric, r.best_so_far));
            }
        }
        fs::write(path, out)?;
    }
    println!("{} {} val_accuracy {}", hp.kind(), hp.describe(), run.val_accuracy);
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), Failure> {
    let model = TrainedModel::from_text(&fs::read_to_string(&args.model)?)?;
    let data = read_dataset(&args.data)?;
    println!("accuracy {}", evaluate(&model, &data)?);
    Ok(())
}

fn cmd_benchmark(args: BenchmarkArgs) -> Result<(), Failure> {
    let mut cfg = match &args.config {
        Some(p) => BenchmarkConfig::from_file(p)?,
        None => BenchmarkConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(runs) = args.runs {
        cfg.runs = runs;
    }
    cfg.validate()?;
    let data = match (&args.data, &cfg.data) {
        (Some(path), _) => read_dataset(path)?,
        (None, Some(DataSource::File(path))) => read_dataset(path)?,
        (None, Some(DataSource::Synthetic(spec))) => generate_dataset(spec)?,
        (None, None) => return Err(usage("no dataset: pass --data or add a [data] section")),
    };
    let report = benchmark(&data, &cfg)?;
    fs::create_dir_all(&args.out_dir)?;
    let dir = &args.out_dir;
    fs::write(dir.join("report.csv"), report.to_csv())?;
    fs::write(dir.join("report.md"), report.to_markdown())?;
    fs::write(dir.join("report.json"), report.to_json())?;
    fs::write(dir.join("curves.csv"), report.curves_csv())?;
    fs::write(dir.join("grid.csv"), report.grid_csv())?;
    fs::write(dir.join("lm_grid.csv"), report.lm_grid_csv())?;
    print!("{}", report.to_markdown());
    let failed: Vec<&str> = report
        .rows
        .iter()
        .filter(|r| r.failure.is_some())
        .map(|r| r.name.as_str())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_TRAINING,
            message: format!("models failed: {}", failed.join(", ")),
        })
    }
}

fn cmd_report(args: ReportArgs) -> Result<(), Failure> {
    let report = BenchmarkReport::from_json(&fs::read_to_string(&args.input)?)?;
    let text = match args.format.as_str() {
        "markdown" | "md" => report.to_markdown(),
        "csv" => report.to_csv(),
        other => return Err(usage(format!("unknown format `{other}`"))),
    };
    write_output(None, &text)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Prepare(a) => cmd_prepare(a),
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
