use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use viloss::data::{normalize_minmax, write_csv, Dataset, NormalizationRecord};
use viloss::experiment::{self, parse_key_values, DataSource, ExperimentConfig, LambdaChoice};
use viloss::grid::{compute_weights_with, fit_grid, select_lambda, WeightOptions};
use viloss::losses::LossSpec;
use viloss::metrics::{classification_metrics, regression_metrics};
use viloss::models::{train, Model, ModelKind, ModelSpec};
use viloss::{Error, Result};

#[derive(Parser)]
#[command(
    name = "viloss",
    version,
    about = "Variation-incentive loss re-weighting for regression"
)]
struct Cli {
    /// key = value file whose entries override command-line flags
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset as CSV
    Gen(GenArgs),
    /// Localized deviation for each lambda candidate
    LdSweep(SweepArgs),
    /// Per-sample uniqueness, abnormality and weight
    Weigh(WeighArgs),
    /// Train one model on a whole dataset
    Train(TrainArgs),
    /// Evaluate a trained model
    Eval(EvalArgs),
    /// Run a preset or configured experiment end to end
    Repro(ReproArgs),
}

#[derive(Args)]
struct DataArgs {
    /// CSV file to read
    #[arg(long, conflicts_with = "synth")]
    data: Option<PathBuf>,
    /// Feature columns as header names or 0-based indices, comma separated
    #[arg(long, requires = "data")]
    features: Option<String>,
    /// Target columns as header names or 0-based indices, comma separated
    #[arg(long, requires = "data")]
    targets: Option<String>,
    /// The CSV file has no header row
    #[arg(long)]
    no_header: bool,
    /// Generate data instead of reading it: synth-1d, synth-2d or binary
    #[arg(long)]
    synth: Option<String>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl DataArgs {
    fn fill(&self, map: &mut BTreeMap<String, String>) {
        if let Some(path) = &self.data {
            map.insert("dataset".into(), "csv".into());
            map.insert("csv_path".into(), path.display().to_string());
            put(map, "feature_columns", self.features.clone());
            put(map, "target_columns", self.targets.clone());
            map.insert("header".into(), (!self.no_header).to_string());
        } else if let Some(s) = &self.synth {
            map.insert("dataset".into(), s.clone());
        }
        map.insert("seeds".into(), self.seed.to_string());
    }
}

#[derive(Args)]
struct GenArgs {
    /// synth-1d, synth-2d or binary
    #[arg(long, default_value = "synth-1d")]
    dataset: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    corrupt_fraction: Option<f64>,
    /// Output CSV; a `.manifest` file is written next to it
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "1,2,5,10,20,50,100")]
    candidates: String,
    /// Feature indices to partition on (default: all)
    #[arg(long)]
    subset: Option<String>,
    /// Write the table here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Args)]
struct WeighArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    lambda: usize,
    #[arg(long, default_value = "l2")]
    gamma_norm: String,
    #[arg(long)]
    subset: Option<String>,
    #[arg(long)]
    mu_floor: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// linear, logistic or polyN
    #[arg(long)]
    model: Option<String>,
    /// mse, huber, lqr or bce
    #[arg(long)]
    loss: Option<String>,
    #[arg(long)]
    huber_delta: Option<f64>,
    #[arg(long, value_enum, default_value = "on")]
    weighted: Switch,
    #[arg(long, default_value = "l2")]
    gamma_norm: String,
    /// Fixed lambda; without it lambda is chosen by localized deviation
    #[arg(long)]
    lambda: Option<usize>,
    #[arg(long)]
    subset: Option<String>,
    #[arg(long)]
    mu_floor: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    no_shuffle: bool,
    /// Model file; normalization is saved alongside as `<out>.norm`
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Model file written by `train`
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
}

#[derive(Args)]
struct ReproArgs {
    /// One of synth-1d, synth-2d, synth-1d-full, synth-2d-full, binary
    preset: Option<String>,
    /// Output directory (default: results/<name>)
    #[arg(long)]
    out: Option<PathBuf>,
}

fn put(map: &mut BTreeMap<String, String>, key: &str, value: Option<impl ToString>) {
    if let Some(v) = value {
        map.insert(key.to_string(), v.to_string());
    }
}

fn build_config(
    mut map: BTreeMap<String, String>,
    file: Option<&Path>,
) -> Result<ExperimentConfig> {
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        map.extend(parse_key_values(&text)?);
    }
    ExperimentConfig::from_map(&map)
}

/// The full dataset for the first seed, normalized on every row. Labels of
/// classification data stay 0/1.
fn load_normalized(cfg: &ExperimentConfig) -> Result<(Dataset, NormalizationRecord)> {
    let raw = cfg.source.load(cfg.seeds[0])?;
    let all: Vec<usize> = (0..raw.len()).collect();
    let (ds, record) = normalize_minmax(&raw, &all)?;
    if cfg.models.contains(&ModelKind::Logistic) {
        return Ok((ds.with_targets(raw.targets().clone())?, record));
    }
    Ok((ds, record))
}

fn subset_of(cfg: &ExperimentConfig, ds: &Dataset) -> Vec<usize> {
    cfg.feature_subset
        .clone()
        .unwrap_or_else(|| (0..ds.n_features()).collect())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn norm_path(model: &Path) -> PathBuf {
    let mut s = model.as_os_str().to_owned();
    s.push(".norm");
    PathBuf::from(s)
}

fn gen(args: GenArgs, file: Option<&Path>) -> Result<()> {
    let mut map = BTreeMap::new();
    map.insert("dataset".into(), args.dataset.clone());
    map.insert("seeds".into(), args.seed.to_string());
    put(&mut map, "n", args.n);
    put(&mut map, "noise_sigma", args.noise_sigma);
    put(&mut map, "corrupt_fraction", args.corrupt_fraction);
    let cfg = build_config(map, file)?;
    let ds = cfg.source.load(cfg.seeds[0])?;
    write_csv(&ds, &args.out)?;
    let mut manifest_path = args.out.as_os_str().to_owned();
    manifest_path.push(".manifest");
    write_text(Path::new(&manifest_path), &experiment::manifest(&cfg))?;
    eprintln!("wrote {} rows to {}", ds.len(), args.out.display());
    Ok(())
}

fn ld_sweep(args: SweepArgs, file: Option<&Path>) -> Result<()> {
    let mut map = BTreeMap::new();
    args.data.fill(&mut map);
    map.insert("lambda_candidates".into(), args.candidates.clone());
    put(&mut map, "feature_subset", args.subset.clone());
    let cfg = build_config(map, file)?;
    let LambdaChoice::Select(candidates) = &cfg.lambda else {
        return Err(Error::Config("ld-sweep needs lambda_candidates".into()));
    };
    let (ds, _) = load_normalized(&cfg)?;
    let sweep = select_lambda(&ds, candidates, &subset_of(&cfg, &ds))?;
    emit(args.out.as_deref(), &sweep.to_csv())?;
    eprintln!("best lambda: {}", sweep.best);
    Ok(())
}

fn weigh(args: WeighArgs, file: Option<&Path>) -> Result<()> {
    let mut map = BTreeMap::new();
    args.data.fill(&mut map);
    map.insert("lambda".into(), args.lambda.to_string());
    map.insert("gamma_norms".into(), args.gamma_norm.clone());
    put(&mut map, "feature_subset", args.subset.clone());
    put(&mut map, "mu_floor", args.mu_floor);
    let cfg = build_config(map, file)?;
    let LambdaChoice::Fixed(lambdas) = &cfg.lambda else {
        return Err(Error::Config("weigh needs a fixed lambda".into()));
    };
    let (ds, _) = load_normalized(&cfg)?;
    let grid = fit_grid(&ds, lambdas[0], &subset_of(&cfg, &ds))?;
    let opts = WeightOptions {
        norm: cfg.norms[0],
        mu_floor: cfg.mu_floor,
    };
    let table = compute_weights_with(&grid, &ds, &opts)?;
    emit(args.out.as_deref(), &table.to_csv())?;
    eprintln!(
        "{} samples, {} non-empty cells, fingerprint {}",
        table.len(),
        grid.cells().len(),
        grid.fingerprint()
    );
    Ok(())
}

fn train_cmd(args: TrainArgs, file: Option<&Path>) -> Result<()> {
    let mut map = BTreeMap::new();
    args.data.fill(&mut map);
    put(&mut map, "models", args.model.clone());
    put(&mut map, "losses", args.loss.clone());
    put(&mut map, "huber_delta", args.huber_delta);
    map.insert("gamma_norms".into(), args.gamma_norm.clone());
    put(&mut map, "lambda", args.lambda);
    put(&mut map, "feature_subset", args.subset.clone());
    put(&mut map, "mu_floor", args.mu_floor);
    put(&mut map, "epochs", args.epochs);
    put(&mut map, "batch_size", args.batch_size);
    put(&mut map, "learning_rate", args.learning_rate);
    if args.no_shuffle {
        map.insert("shuffle".into(), "false".into());
    }
    let cfg = build_config(map, file)?;
    let (ds, record) = load_normalized(&cfg)?;
    let spec = ModelSpec::new(cfg.models[0], ds.n_features(), ds.n_targets())?;
    let base = cfg.losses[0];
    let train_cfg = viloss::models::TrainConfig {
        seed: cfg.seeds[0],
        ..cfg.train.clone()
    };
    let (model, report) = match args.weighted {
        Switch::Off => train(&spec, &ds, &LossSpec::unweighted(base), None, &train_cfg)?,
        Switch::On => {
            let subset = subset_of(&cfg, &ds);
            let lambda = match &cfg.lambda {
                LambdaChoice::Fixed(v) => v[0],
                LambdaChoice::Select(c) => select_lambda(&ds, c, &subset)?.best,
            };
            let grid = fit_grid(&ds, lambda, &subset)?;
            let opts = WeightOptions {
                norm: cfg.norms[0],
                mu_floor: cfg.mu_floor,
            };
            let table = compute_weights_with(&grid, &ds, &opts)?;
            eprintln!("lambda {lambda}, gamma norm {}", cfg.norms[0]);
            let loss = LossSpec::weighted(base, cfg.norms[0]);
            train(&spec, &ds, &loss, Some(&table), &train_cfg)?
        }
    };
    write_text(&args.out, &model.to_text())?;
    write_text(&norm_path(&args.out), &record.to_text())?;
    eprintln!("{report}");
    Ok(())
}

fn eval(args: EvalArgs, file: Option<&Path>) -> Result<()> {
    let read = |p: &Path| {
        std::fs::read_to_string(p).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        })
    };
    let model = Model::from_text(&read(&args.model)?)?;
    let record = NormalizationRecord::from_text(&read(&norm_path(&args.model))?)?;
    let mut map = BTreeMap::new();
    args.data.fill(&mut map);
    map.insert("threshold".into(), args.threshold.to_string());
    if model.spec().kind == ModelKind::Logistic {
        map.insert("models".into(), "logistic".into());
    }
    let cfg = build_config(map, file)?;
    let raw = cfg.source.load(cfg.seeds[0])?;
    let pred = model.predict_dataset(&record.apply(&raw)?)?;
    if model.spec().kind == ModelKind::Logistic {
        let prob = pred.column(0).to_vec();
        let labels = raw.targets().column(0).to_vec();
        println!("{}", classification_metrics(&prob, &labels, cfg.threshold)?);
    } else {
        println!(
            "{}",
            regression_metrics(&record.inverse_targets(&pred)?, raw.targets())?
        );
    }
    Ok(())
}

fn repro(args: ReproArgs, file: Option<&Path>) -> Result<()> {
    let map = match &args.preset {
        Some(name) => parse_key_values(&experiment::preset(name)?.to_text())?,
        None if file.is_some() => BTreeMap::new(),
        None => {
            return Err(Error::Config(
                "repro needs a preset name or --config".into(),
            ))
        }
    };
    let cfg = build_config(map, file)?;
    if let DataSource::Csv { path, .. } = &cfg.source {
        eprintln!("reading {}", path.display());
    }
    let out = experiment::run(&cfg)?;
    let dir = args
        .out
        .unwrap_or_else(|| Path::new("results").join(&cfg.name));
    for path in experiment::write_outputs(&cfg, &out, &dir)? {
        eprintln!("wrote {}", path.display());
    }
    print!("{}", out.summary_csv());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let file = cli.config.as_deref();
    let result = match cli.command {
        Command::Gen(a) => gen(a, file),
        Command::LdSweep(a) => ld_sweep(a, file),
        Command::Weigh(a) => weigh(a, file),
        Command::Train(a) => train_cmd(a, file),
        Command::Eval(a) => eval(a, file),
        Command::Repro(a) => repro(a, file),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
