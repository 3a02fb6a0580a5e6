//! The `fairlist` command line.
//!
//! Every flag can also be set through a `FAIRLIST_<FLAG>` environment
//! variable. Exit codes: 0 success, 2 input error, 3 truncated search with no
//! improvement over the initial model, 4 internal error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::warn;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::data::{
    load_csv, prepare, AntecedentSet, AntecedentSpec, BinaryDataset, MiningConfig, Prepared,
};
use crate::error::{Error, Result};
use crate::fairness::{audit, confusion, FairnessMetric};
use crate::rules::{predict, to_record, to_text, ModelRecord, Provenance, RuleList};
use crate::search::{search, PredictionMode, Pruning, SearchConfig, Strategy};
use crate::sweep::{
    linear_grid, pareto_front, sweep, write_front_csv, write_runs_csv, SweepConfig,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_TRUNCATED: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

/// Stem of the interchange files inside a dataset directory.
const DATASET_STEM: &str = "dataset";
const ANTECEDENTS_FILE: &str = "antecedents.json";

#[derive(Debug, Parser)]
#[command(
    name = "fairlist",
    version,
    about = "Optimal rule lists under fairness constraints"
)]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Discretize, binarize and mine antecedents from a CSV file.
    Mine(MineArgs),
    /// Learn one rule list.
    Train(TrainArgs),
    /// Sweep epsilon with cross-validation and write the Pareto front.
    Sweep(SweepArgs),
    /// Report accuracy and unfairness of a model.
    Audit(AuditArgs),
    /// Write per-sample predictions of a model.
    Predict(PredictArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct MineArgs {
    /// Input CSV with a header row.
    pub csv: PathBuf,
    #[arg(long, env = "FAIRLIST_LABEL")]
    pub label: String,
    #[arg(long, env = "FAIRLIST_SENSITIVE")]
    pub sensitive: String,
    #[arg(long, env = "FAIRLIST_MIN_SUPPORT", default_value_t = 0.01)]
    pub min_support: f64,
    /// Leading fraction of rows used only to learn numeric splits; 0 learns
    /// and applies on all rows.
    #[arg(long, env = "FAIRLIST_MDLP_FRACTION", default_value_t = 1.0 / 3.0)]
    pub mdlp_fraction: f64,
    /// Numeric columns to discretize; detected automatically when omitted.
    #[arg(long, env = "FAIRLIST_NUMERIC", value_delimiter = ',')]
    pub numeric: Option<Vec<String>>,
    /// Output dataset directory.
    #[arg(long, env = "FAIRLIST_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SearchArgs {
    #[arg(long, env = "FAIRLIST_LAMBDA", default_value_t = 1e-3)]
    pub lambda: f64,
    #[arg(long, env = "FAIRLIST_MAX_NODES", default_value_t = 4_000_000)]
    pub max_nodes: usize,
    #[arg(long, env = "FAIRLIST_MAX_LENGTH")]
    pub max_length: Option<usize>,
    /// Seconds per search run.
    #[arg(long, env = "FAIRLIST_TIME_LIMIT")]
    pub time_limit: Option<f64>,
    /// Rule consequents: `free` branches on both labels, `majority` uses
    /// the majority label of the newly captured samples.
    #[arg(long, env = "FAIRLIST_PREDICTIONS", default_value = "free")]
    pub predictions: PredictionMode,
    /// Also prune prefixes equivalent to an already queued one.
    #[arg(long, env = "FAIRLIST_PERMUTATION_PRUNING")]
    pub permutation_pruning: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// Dataset directory written by `mine`.
    pub dataset: PathBuf,
    #[arg(long, env = "FAIRLIST_EPSILON", default_value_t = 0.0)]
    pub epsilon: f64,
    #[arg(long, env = "FAIRLIST_METRIC", default_value = "sp")]
    pub metric: FairnessMetric,
    #[arg(long, env = "FAIRLIST_STRATEGY", default_value = "curious")]
    pub strategy: Strategy,
    #[command(flatten)]
    pub search: SearchArgs,
    #[arg(long, env = "FAIRLIST_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    /// Dataset directory written by `mine`.
    pub dataset: PathBuf,
    #[arg(long, env = "FAIRLIST_METRIC", default_value = "sp")]
    pub metric: FairnessMetric,
    /// Number of evenly spaced values in [0, 1], or a comma-separated list.
    #[arg(long, env = "FAIRLIST_GRID", default_value = "60")]
    pub grid: String,
    #[arg(long, env = "FAIRLIST_FOLDS", default_value_t = 5)]
    pub folds: usize,
    #[arg(long, env = "FAIRLIST_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(
        long,
        env = "FAIRLIST_STRATEGIES",
        value_delimiter = ',',
        default_value = "bfs,bfs-obj,curious,lower-bound"
    )]
    pub strategies: Vec<Strategy>,
    #[arg(long, env = "FAIRLIST_JOBS", default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub search: SearchArgs,
    #[arg(long, env = "FAIRLIST_OUT_DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct AuditArgs {
    /// Model JSON written by `train` or `sweep`.
    pub model: PathBuf,
    /// Dataset directory written by `mine`.
    pub dataset: PathBuf,
    /// Metrics to report; all six by default.
    #[arg(long, env = "FAIRLIST_METRIC", value_delimiter = ',')]
    pub metric: Vec<FairnessMetric>,
    /// Print CSV instead of a table.
    #[arg(long, env = "FAIRLIST_CSV")]
    pub csv: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct PredictArgs {
    /// Model JSON written by `train` or `sweep`.
    pub model: PathBuf,
    /// Dataset directory written by `mine`.
    pub dataset: PathBuf,
    /// Output CSV; standard output when omitted.
    #[arg(long, env = "FAIRLIST_OUT")]
    pub out: Option<PathBuf>,
}

/// Record written next to every command's outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub version: String,
    pub wall_time: f64,
    pub outputs: Vec<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

fn digest(path: &Path) -> Result<InputDigest> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(InputDigest {
        path: path.to_path_buf(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

struct Outputs {
    started: Instant,
    files: Vec<PathBuf>,
}

impl Outputs {
    fn new() -> Self {
        Outputs {
            started: Instant::now(),
            files: Vec::new(),
        }
    }

    fn write(&mut self, path: PathBuf, contents: impl AsRef<[u8]>) -> Result<()> {
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.files.push(path);
        Ok(())
    }

    fn manifest(
        self,
        dir: &Path,
        command: &str,
        config: &impl Serialize,
        inputs: &[PathBuf],
    ) -> Result<()> {
        let manifest = RunManifest {
            command: command.into(),
            argv: std::env::args().collect(),
            config: serde_json::to_value(config)?,
            inputs: inputs.iter().map(|p| digest(p)).collect::<Result<_>>()?,
            version: env!("CARGO_PKG_VERSION").into(),
            wall_time: self.started.elapsed().as_secs_f64(),
            outputs: self.files,
        };
        let path = dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn dataset_files(dir: &Path) -> Vec<PathBuf> {
    let stem = dir.join(DATASET_STEM);
    let mut files: Vec<PathBuf> = ["out", "label", "group"]
        .iter()
        .map(|ext| stem.with_extension(ext))
        .collect();
    files.push(dir.join(ANTECEDENTS_FILE));
    files
}

/// Loads a dataset directory written by `mine`.
pub fn load_dataset(dir: &Path) -> Result<(BinaryDataset, AntecedentSet)> {
    let data = BinaryDataset::read_files(dir.join(DATASET_STEM))?;
    let path = dir.join(ANTECEDENTS_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let specs: Vec<AntecedentSpec> = serde_json::from_str(&text)
        .map_err(|e| Error::malformed("antecedent list", e.to_string()))?;
    let antecedents = AntecedentSet::from_specs(&data, &specs)?;
    Ok((data, antecedents))
}

fn load_model(path: &Path, data: &BinaryDataset) -> Result<(RuleList, AntecedentSet)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ModelRecord::from_json(&text)?.resolve(data)
}

fn search_config(
    args: &SearchArgs,
    epsilon: f64,
    metric: FairnessMetric,
    strategy: Strategy,
) -> SearchConfig {
    SearchConfig {
        lambda: args.lambda,
        epsilon,
        metric,
        strategy,
        max_nodes: args.max_nodes,
        max_length: args.max_length,
        time_limit: args.time_limit,
        predictions: args.predictions,
        pruning: Pruning {
            permutation: args.permutation_pruning,
            ..Pruning::default()
        },
        ..SearchConfig::default()
    }
}

/// Parses `--grid`: an integer count or a comma-separated list of values.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let s = s.trim();
    if let Ok(n) = s.parse::<usize>() {
        if n == 0 {
            return Err(Error::InvalidConfig("grid count must be >= 1".into()));
        }
        return Ok(linear_grid(n));
    }
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidConfig(format!("bad grid value `{v}`")))
        })
        .collect()
}

fn cmd_mine(args: &MineArgs) -> Result<i32> {
    let config = MiningConfig::with_sigma(args.min_support);
    config.validate()?;
    if !(0.0..1.0).contains(&args.mdlp_fraction) {
        return Err(Error::InvalidConfig(format!(
            "mdlp fraction must be in [0, 1), got {}",
            args.mdlp_fraction
        )));
    }
    let mut out = Outputs::new();
    let table = load_csv(&args.csv, &args.label, &args.sensitive)?;
    let Prepared {
        data,
        antecedents,
        splits,
    } = prepare(&table, args.numeric.as_deref(), args.mdlp_fraction, &config)?;

    create_dir(&args.out)?;
    data.write_files(args.out.join(DATASET_STEM))?;
    out.files
        .extend(dataset_files(&args.out).into_iter().take(3));
    out.write(
        args.out.join(ANTECEDENTS_FILE),
        serde_json::to_string_pretty(&antecedents.specs(&data))?,
    )?;
    let listing: String = antecedents
        .iter()
        .map(|a| format!("{}\t{}\n", a.name, a.support))
        .collect();
    out.write(args.out.join("antecedents.txt"), listing)?;
    out.write(
        args.out.join("splits.json"),
        serde_json::to_string_pretty(&splits)?,
    )?;
    out.manifest(&args.out, "mine", args, std::slice::from_ref(&args.csv))?;
    Ok(EXIT_OK)
}

fn cmd_train(args: &TrainArgs) -> Result<i32> {
    let config = search_config(&args.search, args.epsilon, args.metric, args.strategy);
    config.validate()?;
    let mut out = Outputs::new();
    let (data, antecedents) = load_dataset(&args.dataset)?;
    let result = search(&data, &antecedents, &config, None)?;

    create_dir(&args.out)?;
    let mut report = serde_json::to_value(&result)?;
    if let Some(model) = &result.model {
        let p = predict(model, &data, &antecedents)?;
        let conf = confusion(&p.predictions, &data)?;
        let train_error = 1.0 - conf.correct() as f64 / data.n_samples() as f64;
        let model = model.clone().with_provenance(Provenance {
            epsilon: Some(config.epsilon),
            metric: Some(config.metric),
            lambda: Some(config.lambda),
            strategy: Some(config.strategy.as_str().into()),
            train_samples: Some(data.n_samples()),
            train_error: Some(train_error),
            train_unfairness: Some(conf.unfairness(config.metric)),
        });
        let text = to_text(&model, &antecedents)?;
        println!("{text}");
        println!(
            "accuracy {:.4}  unfairness ({}) {:.4}  status {}",
            1.0 - train_error,
            config.metric,
            conf.unfairness(config.metric),
            result.status
        );
        report["train_accuracy"] = (1.0 - train_error).into();
        out.write(args.out.join("model.txt"), text + "\n")?;
        out.write(
            args.out.join("model.json"),
            to_record(&model, &data, &antecedents)?.to_json()?,
        )?;
    } else {
        eprintln!(
            "no rule list satisfies unfairness <= {}",
            config.max_unfairness()
        );
    }
    out.write(
        args.out.join("result.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    out.manifest(&args.out, "train", args, &dataset_files(&args.dataset))?;

    if result.status.is_truncated() && !result.improved {
        eprintln!(
            "search truncated ({}) without improving on the initial model",
            result.status
        );
        return Ok(EXIT_TRUNCATED);
    }
    Ok(EXIT_OK)
}

fn model_file_stem(config: &SweepConfig, epsilon: f64, strategy: Strategy) -> String {
    let idx = config
        .epsilons
        .iter()
        .position(|&e| e == epsilon)
        .unwrap_or(0);
    format!("eps{idx:03}_{strategy}")
}

fn cmd_sweep(args: &SweepArgs) -> Result<i32> {
    let search = search_config(&args.search, 0.0, args.metric, Strategy::Curious);
    let config = SweepConfig {
        epsilons: parse_grid(&args.grid)?,
        metric: args.metric,
        strategies: args.strategies.clone(),
        folds: args.folds,
        seed: args.seed,
        search,
        jobs: args.jobs,
    };
    config.validate()?;
    let mut out = Outputs::new();
    let (data, antecedents) = load_dataset(&args.dataset)?;
    let points = sweep(&data, &antecedents, &config)?;
    let front = pareto_front(&points);

    let models_dir = args.out_dir.join("models");
    create_dir(&models_dir)?;
    let mut runs = Vec::new();
    write_runs_csv(&mut runs, &points)?;
    out.write(args.out_dir.join("runs.csv"), runs)?;

    for &i in &front {
        let p = &points[i];
        if let Some(model) = p.representative_model() {
            let stem = models_dir.join(model_file_stem(&config, p.epsilon, p.strategy));
            out.write(
                stem.with_extension("txt"),
                to_text(model, &antecedents)? + "\n",
            )?;
            out.write(
                stem.with_extension("json"),
                to_record(model, &data, &antecedents)?.to_json()?,
            )?;
        }
    }
    let mut front_csv = Vec::new();
    write_front_csv(&mut front_csv, &points, &front, |p| {
        format!(
            "models/{}.json",
            model_file_stem(&config, p.epsilon, p.strategy)
        )
    })?;
    out.write(args.out_dir.join("front.csv"), front_csv)?;

    let failed = points
        .iter()
        .flat_map(|p| &p.runs)
        .filter(|r| !r.has_model())
        .count();
    if failed > 0 {
        warn!("{failed} runs produced no model");
    }
    println!("{} settings, {} on the front", points.len(), front.len());
    out.manifest(
        &args.out_dir,
        "sweep",
        &config,
        &dataset_files(&args.dataset),
    )?;
    Ok(EXIT_OK)
}

fn fmt_rate(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.4}"))
        .unwrap_or_else(|| "undef".into())
}

fn cmd_audit(args: &AuditArgs) -> Result<i32> {
    let metrics = if args.metric.is_empty() {
        FairnessMetric::ALL.to_vec()
    } else {
        args.metric.clone()
    };
    let (data, _) = load_dataset(&args.dataset)?;
    let (model, antecedents) = load_model(&args.model, &data)?;
    let p = predict(&model, &data, &antecedents)?;
    let conf = confusion(&p.predictions, &data)?;
    let accuracy = if data.n_samples() == 0 {
        0.0
    } else {
        conf.correct() as f64 / data.n_samples() as f64
    };
    let rows = audit(&conf, &metrics);

    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    if args.csv {
        let mut w = csv::Writer::from_writer(&mut lock);
        w.write_record(["metric", "value", "rate", "group0", "group1", "degenerate"])?;
        w.write_record(["accuracy", &accuracy.to_string(), "", "", "", ""])?;
        for row in &rows {
            for (rate, g0, g1) in &row.rates {
                let cell = |x: &Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
                w.write_record([
                    row.metric.as_str(),
                    &row.value.to_string(),
                    rate.as_str(),
                    &cell(g0),
                    &cell(g1),
                    &row.degenerate.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io("<stdout>", e))?;
    } else {
        let io = |e| Error::io("<stdout>", e);
        writeln!(
            lock,
            "accuracy {accuracy:.4} ({} samples)",
            data.n_samples()
        )
        .map_err(io)?;
        for row in &rows {
            let rates: Vec<String> = row
                .rates
                .iter()
                .map(|(r, g0, g1)| format!("{} {} / {}", r.as_str(), fmt_rate(*g0), fmt_rate(*g1)))
                .collect();
            writeln!(
                lock,
                "{:<6} {:.4}  [{}]{}",
                row.metric.as_str(),
                row.value,
                rates.join(", "),
                if row.degenerate { "  degenerate" } else { "" }
            )
            .map_err(io)?;
        }
    }
    Ok(EXIT_OK)
}

fn cmd_predict(args: &PredictArgs) -> Result<i32> {
    let (data, _) = load_dataset(&args.dataset)?;
    let (model, antecedents) = load_model(&args.model, &data)?;
    let p = predict(&model, &data, &antecedents)?;
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["sample", "prediction", "rule"])?;
        for (s, &rule) in p.firing.iter().enumerate() {
            let rule = if rule == model.len() {
                "default".to_string()
            } else {
                rule.to_string()
            };
            w.write_record([
                s.to_string(),
                u8::from(p.predictions.get(s)).to_string(),
                rule,
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
    }
    match &args.out {
        Some(path) => fs::write(path, buf).map_err(|e| Error::io(path, e))?,
        None => std::io::stdout()
            .write_all(&buf)
            .map_err(|e| Error::io("<stdout>", e))?,
    }
    Ok(EXIT_OK)
}

pub fn execute(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Mine(a) => cmd_mine(a),
        Command::Train(a) => cmd_train(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Audit(a) => cmd_audit(a),
        Command::Predict(a) => cmd_predict(a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .try_init();

    match std::panic::catch_unwind(|| execute(&cli)) {
        Ok(Ok(code)) => code,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
        Err(_) => EXIT_INTERNAL,
    }
}
