//! End-to-end experiment runs: data, split, normalization, grid fitting,
//! weighting, training and evaluation, repeated over seeds.
//!
//! Configs are plain `key = value` text. [`ExperimentConfig::to_text`]
//! writes every key in a fixed order, so a run's manifest is itself a config
//! that reproduces the run.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::data::{
    generate_binary, generate_synth, load_csv, normalize_minmax, split_indices, BiasMixture,
    BinarySynthSpec, ColumnRef, Dataset, SynthSpec, SynthVariant,
};
use crate::grid::{
    compute_weights_with, fit_grid, select_lambda, LambdaSweep, NormKind, WeightOptions,
};
use crate::losses::{BaseLoss, LossSpec};
use crate::metrics::{
    classification_metrics, regression_metrics, ClassificationReport, RegressionReport,
};
use crate::models::{train, ModelKind, ModelSpec, TrainConfig};
use crate::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Names accepted by [`preset`].
pub const PRESETS: &[&str] = &[
    "synth-1d",
    "synth-2d",
    "synth-1d-full",
    "synth-2d-full",
    "binary",
];

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    /// The repetition seed replaces `spec.seed`.
    Synth(SynthSpec),
    Binary(BinarySynthSpec),
    Csv {
        path: PathBuf,
        features: Vec<ColumnRef>,
        targets: Vec<ColumnRef>,
        header: bool,
    },
}

impl DataSource {
    pub fn name(&self) -> String {
        match self {
            DataSource::Synth(s) => s.variant.name().to_string(),
            DataSource::Binary(_) => "binary".to_string(),
            DataSource::Csv { path, .. } => path
                .file_stem()
                .map_or_else(|| "csv".to_string(), |s| s.to_string_lossy().into_owned()),
        }
    }

    /// Loads or generates the full dataset for one repetition.
    pub fn load(&self, seed: u64) -> Result<Dataset> {
        match self {
            DataSource::Synth(spec) => generate_synth(&SynthSpec {
                seed,
                ..spec.clone()
            }),
            DataSource::Binary(spec) => generate_binary(&BinarySynthSpec {
                seed,
                ..spec.clone()
            }),
            DataSource::Csv {
                path,
                features,
                targets,
                header,
            } => load_csv(path, features, targets, *header).map(|(d, _)| d),
        }
    }
}

/// How lambda is chosen for the weighted runs.
#[derive(Debug, Clone, PartialEq)]
pub enum LambdaChoice {
    /// One weighted run per listed value.
    Fixed(Vec<usize>),
    /// Per repetition, the candidate with the largest localized deviation on
    /// the training split.
    Select(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub source: DataSource,
    pub models: Vec<ModelKind>,
    pub losses: Vec<BaseLoss>,
    pub norms: Vec<NormKind>,
    pub lambda: LambdaChoice,
    /// `None` partitions on every feature.
    pub feature_subset: Option<Vec<usize>>,
    pub mu_floor: f64,
    pub train: TrainConfig,
    pub train_fraction: f64,
    pub split_shuffle: bool,
    pub seeds: Vec<u64>,
    pub threshold: f64,
}

const KEYS: &[&str] = &[
    "name",
    "dataset",
    "n",
    "noise_sigma",
    "corrupt_fraction",
    "cluster_fraction",
    "cluster_center",
    "cluster_sigma",
    "positive_fraction",
    "label_noise",
    "negative_center",
    "positive_center",
    "csv_path",
    "feature_columns",
    "target_columns",
    "header",
    "models",
    "losses",
    "huber_delta",
    "gamma_norms",
    "lambda",
    "lambda_candidates",
    "feature_subset",
    "mu_floor",
    "epochs",
    "batch_size",
    "learning_rate",
    "decay_every",
    "decay_factor",
    "shuffle",
    "train_fraction",
    "split_shuffle",
    "seeds",
    "threshold",
];

/// Parses `key = value` lines; `#` starts a comment. Later keys win.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "line {}: expected key = value, got {raw:?}",
                lineno + 1
            ))
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn list<T>(s: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(f)
        .collect()
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

struct Fields<'a>(&'a BTreeMap<String, String>);

impl Fields<'_> {
    fn get<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.0.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}"))),
        }
    }

    fn floats(&self, key: &str, default: Vec<f64>) -> Result<Vec<f64>> {
        match self.0.get(key) {
            None => Ok(default),
            Some(v) => list(v, |t| {
                t.parse()
                    .map_err(|_| Error::Config(format!("{key}: cannot parse {t:?}")))
            }),
        }
    }

    fn pair(&self, key: &str, default: [f64; 2]) -> Result<[f64; 2]> {
        let v = self.floats(key, default.to_vec())?;
        v.try_into()
            .map_err(|_| Error::Config(format!("{key}: expected two values")))
    }

    fn bool(&self, key: &str, default: bool) -> Result<bool> {
        match self.0.get(key).map(|s| s.to_ascii_lowercase()) {
            None => Ok(default),
            Some(v) => match v.as_str() {
                "true" | "on" | "yes" | "1" => Ok(true),
                "false" | "off" | "no" | "0" => Ok(false),
                _ => Err(Error::Config(format!(
                    "{key}: expected a boolean, got {v:?}"
                ))),
            },
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_map(&parse_key_values(text)?)
    }

    /// Builds and validates a config. Unknown keys are rejected.
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        if let Some(k) = map
            .keys()
            .find(|k| !KEYS.contains(&k.as_str()) && k.as_str() != "version")
        {
            return Err(Error::Config(format!("unknown key {k:?}")));
        }
        let f = Fields(map);
        let dataset = map.get("dataset").map(String::as_str).unwrap_or("synth-1d");
        let source = match dataset {
            "binary" => {
                let d = BinarySynthSpec::new(0);
                DataSource::Binary(BinarySynthSpec {
                    n: f.get("n", d.n)?,
                    positive_fraction: f.get("positive_fraction", d.positive_fraction)?,
                    label_noise: f.get("label_noise", d.label_noise)?,
                    negative_center: f.pair("negative_center", d.negative_center)?,
                    positive_center: f.pair("positive_center", d.positive_center)?,
                    cluster_sigma: f.get("cluster_sigma", d.cluster_sigma)?,
                    seed: 0,
                })
            }
            "csv" => DataSource::Csv {
                path: PathBuf::from(
                    map.get("csv_path")
                        .ok_or_else(|| Error::Config("csv dataset needs csv_path".into()))?,
                ),
                features: ColumnRef::parse_list(
                    map.get("feature_columns")
                        .ok_or_else(|| Error::Config("csv dataset needs feature_columns".into()))?,
                ),
                targets: ColumnRef::parse_list(
                    map.get("target_columns")
                        .ok_or_else(|| Error::Config("csv dataset needs target_columns".into()))?,
                ),
                header: f.bool("header", true)?,
            },
            other => {
                let variant: SynthVariant = other
                    .parse()
                    .map_err(|e| Error::Config(format!("dataset: {e}")))?;
                let d = SynthSpec::new(variant, 0);
                let spec = SynthSpec {
                    variant,
                    n: f.get("n", d.n)?,
                    noise_sigma: f.get("noise_sigma", d.noise_sigma)?,
                    corrupt_fraction: f.get("corrupt_fraction", d.corrupt_fraction)?,
                    bias: BiasMixture {
                        cluster_fraction: f.get("cluster_fraction", d.bias.cluster_fraction)?,
                        cluster_center: f.floats("cluster_center", d.bias.cluster_center)?,
                        cluster_sigma: f.get("cluster_sigma", d.bias.cluster_sigma)?,
                    },
                    seed: 0,
                };
                spec.validate().map_err(|e| Error::Config(e.to_string()))?;
                DataSource::Synth(spec)
            }
        };

        let is_classification = matches!(source, DataSource::Binary(_));
        let default_models = if is_classification {
            "logistic"
        } else {
            "poly6"
        };
        let models = list(
            map.get("models").map_or(default_models, String::as_str),
            |s| s.parse(),
        )?;
        let delta: f64 = f.get("huber_delta", 1.0)?;
        let default_losses = if is_classification { "bce" } else { "mse" };
        let losses = list(
            map.get("losses").map_or(default_losses, String::as_str),
            |s| match s.parse::<BaseLoss>()? {
                BaseLoss::Huber { .. } => BaseLoss::huber(delta),
                other => Ok(other),
            },
        )?;
        let norms = list(
            map.get("gamma_norms").map_or("l1,l2", String::as_str),
            |s| s.parse(),
        )?;
        let usizes = |key: &str, v: &str| -> Result<Vec<usize>> {
            list(v, |t| {
                t.parse()
                    .map_err(|_| Error::Config(format!("{key}: cannot parse {t:?}")))
            })
        };
        let lambda = match (map.get("lambda"), map.get("lambda_candidates")) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "set either lambda or lambda_candidates, not both".into(),
                ))
            }
            (Some(v), None) => LambdaChoice::Fixed(usizes("lambda", v)?),
            (None, Some(v)) => LambdaChoice::Select(usizes("lambda_candidates", v)?),
            (None, None) => LambdaChoice::Select(vec![2, 5, 10, 20, 50, 100]),
        };
        let feature_subset = match map.get("feature_subset").map(String::as_str) {
            None | Some("all") => None,
            Some(v) => Some(usizes("feature_subset", v)?),
        };
        let seeds = match map.get("seeds") {
            None => vec![1, 2, 3, 4, 5],
            Some(v) => list(v, |t| {
                t.parse()
                    .map_err(|_| Error::Config(format!("seeds: cannot parse {t:?}")))
            })?,
        };
        let d = TrainConfig::default();
        let train = TrainConfig {
            epochs: f.get("epochs", d.epochs)?,
            batch_size: f.get("batch_size", d.batch_size)?,
            learning_rate: f.get("learning_rate", d.learning_rate)?,
            seed: 0,
            shuffle: f.bool("shuffle", d.shuffle)?,
            decay_every: f.get("decay_every", d.decay_every)?,
            decay_factor: f.get("decay_factor", d.decay_factor)?,
        };
        let cfg = ExperimentConfig {
            name: map.get("name").cloned().unwrap_or_else(|| source.name()),
            source,
            models,
            losses,
            norms,
            lambda,
            feature_subset,
            mu_floor: f.get("mu_floor", 0.0)?,
            train,
            train_fraction: f.get("train_fraction", 0.7)?,
            split_shuffle: f.bool("split_shuffle", true)?,
            seeds,
            threshold: f.get("threshold", 0.5)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.models.is_empty() || self.losses.is_empty() || self.seeds.is_empty() {
            return fail("models, losses and seeds must be non-empty");
        }
        let lambdas = match &self.lambda {
            LambdaChoice::Fixed(v) | LambdaChoice::Select(v) => v,
        };
        if lambdas.is_empty() || lambdas.contains(&0) {
            return fail("lambda values must be >= 1 and non-empty");
        }
        if self.norms.is_empty() {
            return fail("gamma_norms must be non-empty");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return fail("train_fraction must be in (0, 1)");
        }
        if self.train.epochs == 0
            || self.train.batch_size == 0
            || self.train.learning_rate.is_nan()
            || self.train.learning_rate <= 0.0
        {
            return fail("epochs, batch_size and learning_rate must be positive");
        }
        if self.mu_floor.is_nan() || self.mu_floor < 0.0 {
            return fail("mu_floor must be >= 0");
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return fail("threshold must be in (0, 1)");
        }
        for m in &self.models {
            for l in &self.losses {
                if (*l == BaseLoss::Bce) != (*m == ModelKind::Logistic) {
                    return fail("bce pairs only with the logistic model and vice versa");
                }
            }
        }
        Ok(())
    }

    /// Canonical `key = value` text with every key set.
    pub fn to_text(&self) -> String {
        let mut kv: Vec<(&str, String)> = vec![("name", self.name.clone())];
        match &self.source {
            DataSource::Synth(s) => {
                kv.push(("dataset", s.variant.name().into()));
                kv.push(("n", s.n.to_string()));
                kv.push(("noise_sigma", s.noise_sigma.to_string()));
                kv.push(("corrupt_fraction", s.corrupt_fraction.to_string()));
                kv.push(("cluster_fraction", s.bias.cluster_fraction.to_string()));
                kv.push(("cluster_center", join(&s.bias.cluster_center)));
                kv.push(("cluster_sigma", s.bias.cluster_sigma.to_string()));
            }
            DataSource::Binary(b) => {
                kv.push(("dataset", "binary".into()));
                kv.push(("n", b.n.to_string()));
                kv.push(("positive_fraction", b.positive_fraction.to_string()));
                kv.push(("label_noise", b.label_noise.to_string()));
                kv.push(("negative_center", join(&b.negative_center)));
                kv.push(("positive_center", join(&b.positive_center)));
                kv.push(("cluster_sigma", b.cluster_sigma.to_string()));
            }
            DataSource::Csv {
                path,
                features,
                targets,
                header,
            } => {
                kv.push(("dataset", "csv".into()));
                kv.push(("csv_path", path.display().to_string()));
                kv.push(("feature_columns", join(features)));
                kv.push(("target_columns", join(targets)));
                kv.push(("header", header.to_string()));
            }
        }
        kv.push((
            "models",
            self.models
                .iter()
                .map(ModelKind::label)
                .collect::<Vec<_>>()
                .join(","),
        ));
        kv.push(("losses", join(&self.losses)));
        let delta = self.losses.iter().find_map(|l| match l {
            BaseLoss::Huber { delta } => Some(*delta),
            _ => None,
        });
        kv.push(("huber_delta", delta.unwrap_or(1.0).to_string()));
        kv.push(("gamma_norms", join(&self.norms)));
        match &self.lambda {
            LambdaChoice::Fixed(v) => kv.push(("lambda", join(v))),
            LambdaChoice::Select(v) => kv.push(("lambda_candidates", join(v))),
        }
        kv.push((
            "feature_subset",
            self.feature_subset
                .as_ref()
                .map_or_else(|| "all".into(), |v| join(v)),
        ));
        kv.push(("mu_floor", self.mu_floor.to_string()));
        kv.push(("epochs", self.train.epochs.to_string()));
        kv.push(("batch_size", self.train.batch_size.to_string()));
        kv.push(("learning_rate", self.train.learning_rate.to_string()));
        kv.push(("decay_every", self.train.decay_every.to_string()));
        kv.push(("decay_factor", self.train.decay_factor.to_string()));
        kv.push(("shuffle", self.train.shuffle.to_string()));
        kv.push(("train_fraction", self.train_fraction.to_string()));
        kv.push(("split_shuffle", self.split_shuffle.to_string()));
        kv.push(("seeds", join(&self.seeds)));
        kv.push(("threshold", self.threshold.to_string()));
        kv.iter().fold(String::new(), |mut s, (k, v)| {
            let _ = writeln!(s, "{k} = {v}");
            s
        })
    }

    fn is_classification(&self) -> bool {
        self.models.contains(&ModelKind::Logistic)
    }
}

/// Built-in experiment configs.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let text = match name {
        // Corruption levels were calibrated on the unweighted MSE baseline
        // MAPE alone (about 0.3 for 1-D, 0.2 for 2-D).
        "synth-1d" => {
            "name = synth-1d\ndataset = synth-1d\ncorrupt_fraction = 0.25\nmodels = poly6\nlosses = mse,huber,lqr\nlambda = 2\n\
             epochs = 200\nbatch_size = 1\nlearning_rate = 0.05\n"
        }
        "synth-2d" => {
            "name = synth-2d\ndataset = synth-2d\ncorrupt_fraction = 0.01\nmodels = poly6\nlosses = mse,huber,lqr\nlambda = 10\n\
             epochs = 200\nbatch_size = 5\nlearning_rate = 0.05\n"
        }
        // lambda study over three polynomial degrees
        "synth-1d-full" => {
            "name = synth-1d-full\ndataset = synth-1d\ncorrupt_fraction = 0.25\nmodels = poly3,poly6,poly10\nlosses = mse\n\
             lambda = 1,2,5,10,20,50,100\nepochs = 200\nbatch_size = 1\nlearning_rate = 0.05\n"
        }
        "synth-2d-full" => {
            "name = synth-2d-full\ndataset = synth-2d\ncorrupt_fraction = 0.01\nmodels = poly3,poly6,poly10\nlosses = mse\n\
             lambda = 1,2,5,10,20,50,100\nepochs = 200\nbatch_size = 5\nlearning_rate = 0.05\n"
        }
        "binary" => {
            "name = binary\ndataset = binary\nmodels = logistic\nlosses = bce\n\
             lambda_candidates = 2,5,10,20\nepochs = 100\nbatch_size = 10\nlearning_rate = 0.5\n"
        }
        other => {
            return Err(Error::Config(format!(
                "unknown preset {other:?}; available: {}",
                PRESETS.join(", ")
            )))
        }
    };
    ExperimentConfig::parse(text)
}

/// One evaluated (seed, model, loss, norm, lambda) combination.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub dataset: String,
    pub model: String,
    pub loss: String,
    pub gamma_norm: Option<NormKind>,
    pub lambda: Option<usize>,
    pub seed: u64,
    pub regression: Option<RegressionReport>,
    pub classification: Option<ClassificationReport>,
}

impl ResultRow {
    fn key(&self, with_lambda: bool) -> (String, String, String, Option<usize>) {
        (
            self.model.clone(),
            self.loss.clone(),
            self.gamma_norm
                .map_or_else(|| "-".into(), |n| n.to_string()),
            self.lambda.filter(|_| with_lambda),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub classification: bool,
    /// Lambda was chosen per seed, so summaries do not group by it.
    pub lambda_selected: bool,
    pub rows: Vec<ResultRow>,
    /// LD sweep per seed, when lambda is selected.
    pub sweeps: Vec<(u64, LambdaSweep)>,
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "-".into(), |v| v.to_string())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

impl ExperimentOutput {
    fn header(&self, prefix: &str) -> String {
        let mut h = format!("dataset,model,loss,gamma_norm,lambda,{prefix}mape,{prefix}mae");
        if self.classification {
            for m in ["acc", "prec", "rec", "f1"] {
                let _ = write!(h, ",{prefix}{m}");
            }
        }
        h
    }

    /// `dataset,model,loss,gamma_norm,lambda,seed,mape,mae[,acc,prec,rec,f1]`
    pub fn results_csv(&self) -> String {
        let mut s = self.header("").replace(",lambda,", ",lambda,seed,");
        s.push('\n');
        for r in &self.rows {
            let _ = write!(
                s,
                "{},{},{},{},{},{}",
                r.dataset,
                r.model,
                r.loss,
                opt(r.gamma_norm),
                opt(r.lambda),
                r.seed
            );
            let reg = r.regression.as_ref();
            let _ = write!(
                s,
                ",{},{}",
                opt(reg.map(|m| m.mape)),
                opt(reg.map(|m| m.mae))
            );
            if let Some(c) = &r.classification {
                let _ = write!(s, ",{},{},{},{}", c.accuracy, c.precision, c.recall, c.f1);
            }
            s.push('\n');
        }
        s
    }

    /// Medians over seeds per (model, loss, norm, lambda). For selected
    /// lambdas the lambda column is `-` because it can vary by seed.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut groups: BTreeMap<(String, String, String, Option<usize>), Vec<&ResultRow>> =
            BTreeMap::new();
        let mut order = Vec::new();
        for r in &self.rows {
            let k = r.key(!self.lambda_selected);
            if !groups.contains_key(&k) {
                order.push(k.clone());
            }
            groups.entry(k).or_default().push(r);
        }
        order
            .into_iter()
            .map(|k| {
                let rows = &groups[&k];
                let pick = |f: &dyn Fn(&ResultRow) -> Option<f64>| -> Option<f64> {
                    let v: Option<Vec<f64>> = rows.iter().map(|r| f(r)).collect();
                    v.map(median)
                };
                SummaryRow {
                    dataset: rows[0].dataset.clone(),
                    model: k.0.clone(),
                    loss: k.1.clone(),
                    gamma_norm: k.2.clone(),
                    lambda: k.3,
                    mape: pick(&|r| r.regression.map(|m| m.mape)),
                    mae: pick(&|r| r.regression.map(|m| m.mae)),
                    accuracy: pick(&|r| r.classification.map(|c| c.accuracy)),
                    precision: pick(&|r| r.classification.map(|c| c.precision)),
                    recall: pick(&|r| r.classification.map(|c| c.recall)),
                    f1: pick(&|r| r.classification.map(|c| c.f1)),
                }
            })
            .collect()
    }

    pub fn summary_csv(&self) -> String {
        let mut s = self.header("median_");
        s.push('\n');
        for r in self.summary() {
            let _ = write!(
                s,
                "{},{},{},{},{},{},{}",
                r.dataset,
                r.model,
                r.loss,
                r.gamma_norm,
                opt(r.lambda),
                opt(r.mape),
                opt(r.mae)
            );
            if self.classification {
                let _ = write!(
                    s,
                    ",{},{},{},{}",
                    opt(r.accuracy),
                    opt(r.precision),
                    opt(r.recall),
                    opt(r.f1)
                );
            }
            s.push('\n');
        }
        s
    }

    pub fn sweep_csv(&self) -> String {
        let mut s = String::from("seed,lambda,ld,nonempty_cells\n");
        for (seed, sweep) in &self.sweeps {
            for r in &sweep.rows {
                let _ = writeln!(s, "{seed},{},{},{}", r.lambda, r.ld, r.nonempty_cells);
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub dataset: String,
    pub model: String,
    pub loss: String,
    pub gamma_norm: String,
    pub lambda: Option<usize>,
    pub mape: Option<f64>,
    pub mae: Option<f64>,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

/// Prepared data for one repetition: normalized train/test splits plus what
/// is needed to map predictions back to original units.
pub struct Prepared {
    pub train: Dataset,
    pub test: Dataset,
    /// Test targets in original units.
    pub test_targets: ndarray::Array2<f64>,
}

/// Splits, then min-max normalizes with training statistics. Classification
/// labels are left as 0/1.
pub fn prepare(config: &ExperimentConfig, seed: u64) -> Result<Prepared> {
    let full = config.source.load(seed)?;
    let (train_idx, test_idx) = split_indices(
        full.len(),
        config.train_fraction,
        seed,
        config.split_shuffle,
    )?;
    let (mut normalized, _) = normalize_minmax(&full, &train_idx)?;
    if config.is_classification() {
        normalized = normalized.with_targets(full.targets().clone())?;
    }
    Ok(Prepared {
        train: normalized.select_rows(&train_idx),
        test: normalized.select_rows(&test_idx),
        test_targets: full.select_rows(&test_idx).targets().clone(),
    })
}

fn run_seed(config: &ExperimentConfig, seed: u64) -> Result<(Vec<ResultRow>, Option<LambdaSweep>)> {
    let data = prepare(config, seed)?;
    let subset: Vec<usize> = config
        .feature_subset
        .clone()
        .unwrap_or_else(|| (0..data.train.n_features()).collect());
    let (lambdas, sweep) = match &config.lambda {
        LambdaChoice::Fixed(v) => (v.clone(), None),
        LambdaChoice::Select(candidates) => {
            let sweep = select_lambda(&data.train, candidates, &subset)?;
            (vec![sweep.best], Some(sweep))
        }
    };
    let mut tables = Vec::new();
    for &lambda in &lambdas {
        let grid = fit_grid(&data.train, lambda, &subset)?;
        for &norm in &config.norms {
            let opts = WeightOptions {
                norm,
                mu_floor: config.mu_floor,
            };
            tables.push((
                lambda,
                norm,
                compute_weights_with(&grid, &data.train, &opts)?,
            ));
        }
    }

    let train_cfg = TrainConfig {
        seed,
        ..config.train.clone()
    };
    let dataset = config.source.name();
    let mut rows = Vec::new();
    for &kind in &config.models {
        let spec = ModelSpec::new(kind, data.train.n_features(), data.train.n_targets())?;
        for &base in &config.losses {
            let mut runs = vec![(LossSpec::unweighted(base), None, None)];
            for (lambda, norm, table) in &tables {
                runs.push((LossSpec::weighted(base, *norm), Some(*lambda), Some(table)));
            }
            for (loss, lambda, table) in runs {
                let (model, _) = train(&spec, &data.train, &loss, table, &train_cfg)?;
                let pred = model.predict_dataset(&data.test)?;
                let mut row = ResultRow {
                    dataset: dataset.clone(),
                    model: kind.label(),
                    loss: loss.label(),
                    gamma_norm: loss.weighted.then_some(loss.norm),
                    lambda,
                    seed,
                    regression: None,
                    classification: None,
                };
                if kind == ModelKind::Logistic {
                    let prob: Vec<f64> = pred.column(0).to_vec();
                    let labels: Vec<f64> = data.test_targets.column(0).to_vec();
                    row.classification =
                        Some(classification_metrics(&prob, &labels, config.threshold)?);
                } else {
                    let record = data
                        .test
                        .normalization()
                        .expect("prepared data is normalized");
                    let denorm = record.inverse_targets(&pred)?;
                    row.regression = Some(regression_metrics(&denorm, &data.test_targets)?);
                }
                rows.push(row);
            }
        }
    }
    Ok((rows, sweep))
}

/// Runs every repetition. Seeds run on separate threads; results are
/// collected in seed-list order so output does not depend on scheduling.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let results: Vec<Result<(Vec<ResultRow>, Option<LambdaSweep>)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = config
            .seeds
            .iter()
            .map(|&seed| scope.spawn(move || run_seed(config, seed)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("experiment thread panicked"))
            .collect()
    });
    let mut out = ExperimentOutput {
        classification: config.is_classification(),
        lambda_selected: matches!(config.lambda, LambdaChoice::Select(_)),
        rows: Vec::new(),
        sweeps: Vec::new(),
    };
    for (seed, res) in config.seeds.iter().zip(results) {
        let (rows, sweep) = res?;
        out.rows.extend(rows);
        if let Some(s) = sweep {
            out.sweeps.push((*seed, s));
        }
    }
    Ok(out)
}

/// Manifest text: the canonical config plus the toolkit version.
pub fn manifest(config: &ExperimentConfig) -> String {
    format!(
        "# viloss experiment manifest\nversion = {VERSION}\n{}",
        config.to_text()
    )
}

/// Writes `manifest.txt`, `results.csv`, `summary.csv` and, with lambda
/// selection, `sweep.csv` into `dir`. On failure any file already written is
/// removed.
pub fn write_outputs(
    config: &ExperimentConfig,
    output: &ExperimentOutput,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = vec![
        ("manifest.txt", manifest(config)),
        ("results.csv", output.results_csv()),
        ("summary.csv", output.summary_csv()),
    ];
    if !output.sweeps.is_empty() {
        files.push(("sweep.csv", output.sweep_csv()));
    }
    let mut written = Vec::new();
    for (name, contents) in files {
        let path = dir.join(name);
        if let Err(e) = std::fs::write(&path, contents) {
            for p in &written {
                let _ = std::fs::remove_file(p);
            }
            return Err(Error::io(path, e));
        }
        written.push(path);
    }
    Ok(written)
}
