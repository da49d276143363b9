//! Linear, polynomial and logistic predictors and a mini-batch SGD trainer
//! that consumes per-sample loss weights.
//!
//! Parameters are stored flat, one block per output: the weights over the
//! basis features followed by the bias. Polynomial models use the monomials
//! of [`expand_polynomial`] without the constant term, which the bias
//! replaces.

use std::fmt::{self, Write as _};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::grid::WeightTable;
use crate::losses::{BaseLoss, LossEval, LossSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Linear,
    Polynomial { degree: u32 },
    Logistic,
}

impl ModelKind {
    /// `linear`, `poly6`, `logistic`.
    pub fn label(&self) -> String {
        match self {
            ModelKind::Linear => "linear".into(),
            ModelKind::Polynomial { degree } => format!("poly{degree}"),
            ModelKind::Logistic => "logistic".into(),
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    /// Accepts `linear`, `logistic`, `polyN` or `polynomial:N`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let degree = s
            .strip_prefix("polynomial:")
            .or_else(|| s.strip_prefix("poly"))
            .map(|d| d.parse::<u32>());
        match (s.as_str(), degree) {
            ("linear", _) => Ok(ModelKind::Linear),
            ("logistic", _) => Ok(ModelKind::Logistic),
            (_, Some(Ok(degree))) if degree >= 1 => Ok(ModelKind::Polynomial { degree }),
            _ => Err(Error::Parse(format!("unknown model {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub input_dim: usize,
    pub output_dim: usize,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, input_dim: usize, output_dim: usize) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 {
            return Err(Error::InvalidArgument(
                "model dimensions must be positive".into(),
            ));
        }
        if kind == ModelKind::Logistic && output_dim != 1 {
            return Err(Error::InvalidArgument(
                "logistic model has a single output".into(),
            ));
        }
        if let ModelKind::Polynomial { degree: 0 } = kind {
            return Err(Error::InvalidArgument(
                "polynomial degree must be >= 1".into(),
            ));
        }
        Ok(Self {
            kind,
            input_dim,
            output_dim,
        })
    }

    /// Number of basis features, excluding the bias.
    pub fn basis_len(&self) -> usize {
        match self.kind {
            ModelKind::Polynomial { degree } => {
                monomial_exponents(self.input_dim, degree).len() - 1
            }
            ModelKind::Linear | ModelKind::Logistic => self.input_dim,
        }
    }

    pub fn n_params(&self) -> usize {
        self.output_dim * (self.basis_len() + 1)
    }
}

/// Exponent vectors of every monomial of total degree `0..=degree` in
/// graded lexicographic order: by total degree, then by descending exponent
/// of the first variable, then the second, and so on.
pub fn monomial_exponents(n_vars: usize, degree: u32) -> Vec<Vec<u32>> {
    fn fill(prefix: &mut Vec<u32>, vars_left: usize, remaining: u32, out: &mut Vec<Vec<u32>>) {
        if vars_left == 1 {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in (0..=remaining).rev() {
            prefix.push(e);
            fill(prefix, vars_left - 1, remaining - e, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n_vars == 0 {
        out.push(Vec::new());
        return out;
    }
    for total in 0..=degree {
        fill(&mut Vec::with_capacity(n_vars), n_vars, total, &mut out);
    }
    out
}

/// All monomials of total degree up to `degree`, constant first, in graded
/// lexicographic order. For `(a, b)` and degree 2: `[1, a, b, a^2, ab, b^2]`.
pub fn expand_polynomial(features: &[f64], degree: u32) -> Vec<f64> {
    eval_monomials(features, &monomial_exponents(features.len(), degree))
}

fn eval_monomials(features: &[f64], exponents: &[Vec<u32>]) -> Vec<f64> {
    exponents
        .iter()
        .map(|exps| {
            features
                .iter()
                .zip(exps)
                .filter(|(_, &e)| e > 0)
                .map(|(x, &e)| x.powi(e as i32))
                .product()
        })
        .collect()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Feature map of a model, with the monomial table cached.
#[derive(Debug, Clone)]
struct Basis {
    exponents: Option<Vec<Vec<u32>>>,
}

impl Basis {
    fn new(spec: &ModelSpec) -> Self {
        let exponents = match spec.kind {
            ModelKind::Polynomial { degree } => {
                Some(monomial_exponents(spec.input_dim, degree)[1..].to_vec())
            }
            _ => None,
        };
        Self { exponents }
    }

    fn map(&self, x: &[f64]) -> Vec<f64> {
        match &self.exponents {
            Some(e) => eval_monomials(x, e),
            None => x.to_vec(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Model {
    spec: ModelSpec,
    params: Vec<f64>,
    basis: Basis,
}

impl PartialEq for Model {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec && self.params == other.params
    }
}

impl Model {
    /// All-zero parameters.
    pub fn zeros(spec: ModelSpec) -> Self {
        Self::with_params(spec, vec![0.0; spec.n_params()]).expect("length matches")
    }

    pub fn with_params(spec: ModelSpec, params: Vec<f64>) -> Result<Self> {
        if params.len() != spec.n_params() {
            return Err(Error::DimensionMismatch {
                expected: spec.n_params(),
                actual: params.len(),
            });
        }
        Ok(Self {
            basis: Basis::new(&spec),
            spec,
            params,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.spec.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.spec.input_dim,
                actual: x.len(),
            });
        }
        Ok(())
    }

    fn forward_basis(&self, phi: &[f64]) -> Vec<f64> {
        let stride = phi.len() + 1;
        self.params
            .chunks_exact(stride)
            .map(|block| {
                let z = block[..phi.len()]
                    .iter()
                    .zip(phi)
                    .map(|(w, p)| w * p)
                    .sum::<f64>()
                    + block[phi.len()];
                match self.spec.kind {
                    ModelKind::Logistic => sigmoid(z),
                    _ => z,
                }
            })
            .collect()
    }

    /// Affine output over the basis features; logistic models return the
    /// sigmoid of it.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.forward_basis(&self.basis.map(x)))
    }

    /// Predictions for every row of `dataset`.
    pub fn predict_dataset(&self, dataset: &Dataset) -> Result<ndarray::Array2<f64>> {
        let mut out = ndarray::Array2::zeros((dataset.len(), self.spec.output_dim));
        for i in 0..dataset.len() {
            let p = self.predict(&dataset.feature_row(i).to_vec())?;
            out.row_mut(i).assign(&ndarray::ArrayView1::from(&p));
        }
        Ok(out)
    }

    fn grad_basis(&self, phi: &[f64], y: &[f64], loss: &BaseLoss) -> Result<(LossEval, Vec<f64>)> {
        let y_hat = self.forward_basis(phi);
        let eval = loss.eval(&y_hat, y)?;
        let mut grad = Vec::with_capacity(self.params.len());
        for (o, g) in eval.grad.iter().enumerate() {
            let dz = match self.spec.kind {
                ModelKind::Logistic => g * y_hat[o] * (1.0 - y_hat[o]),
                _ => *g,
            };
            grad.extend(phi.iter().map(|p| dz * p));
            grad.push(dz);
        }
        Ok((eval, grad))
    }

    /// Base loss at `(x, y)` and its gradient with respect to the parameters.
    pub fn param_gradient(
        &self,
        x: &[f64],
        y: &[f64],
        loss: &BaseLoss,
    ) -> Result<(LossEval, Vec<f64>)> {
        self.check_input(x)?;
        self.grad_basis(&self.basis.map(x), y, loss)
    }

    /// Weighted loss and parameter gradient. The weight multiplies the base
    /// parameter gradient as the last step, so `weight = 1` reproduces the
    /// base gradient exactly.
    pub fn weighted_param_gradient(
        &self,
        x: &[f64],
        y: &[f64],
        loss: &BaseLoss,
        weight: f64,
    ) -> Result<(f64, Vec<f64>)> {
        let (eval, mut grad) = self.param_gradient(x, y, loss)?;
        grad.iter_mut().for_each(|g| *g *= weight);
        Ok((weight * eval.value, grad))
    }

    /// Sum over `rows` of weighted losses and weighted parameter gradients,
    /// without any reduction.
    pub fn gradient_sum(
        &self,
        dataset: &Dataset,
        rows: &[usize],
        weights: &[f64],
        loss: &BaseLoss,
    ) -> Result<(f64, Vec<f64>)> {
        let mut total = 0.0;
        let mut acc = vec![0.0; self.params.len()];
        for &i in rows {
            let x = dataset.feature_row(i).to_vec();
            let y = dataset.target_row(i).to_vec();
            let (l, g) = self.weighted_param_gradient(&x, &y, loss, weights[i])?;
            total += l;
            acc.iter_mut().zip(g).for_each(|(a, g)| *a += g);
        }
        Ok((total, acc))
    }

    /// Text form: `kind,degree,input_dim,output_dim` then one parameter per
    /// line with round-trip precision.
    pub fn to_text(&self) -> String {
        let (kind, degree) = match self.spec.kind {
            ModelKind::Linear => ("linear", 0),
            ModelKind::Polynomial { degree } => ("polynomial", degree),
            ModelKind::Logistic => ("logistic", 0),
        };
        let mut s = format!(
            "{kind},{degree},{},{}\n",
            self.spec.input_dim, self.spec.output_dim
        );
        for p in &self.params {
            let _ = writeln!(s, "{p}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty model file".into()))?;
        let h: Vec<&str> = header.split(',').map(str::trim).collect();
        let bad = |what: &str| Error::Parse(format!("model file: {what}"));
        if h.len() != 4 {
            return Err(bad("header must be kind,degree,input_dim,output_dim"));
        }
        let degree: u32 = h[1].parse().map_err(|_| bad("degree"))?;
        let kind = match h[0] {
            "linear" => ModelKind::Linear,
            "logistic" => ModelKind::Logistic,
            "polynomial" => ModelKind::Polynomial { degree },
            other => return Err(bad(&format!("unknown kind {other:?}"))),
        };
        let input_dim = h[2].parse().map_err(|_| bad("input_dim"))?;
        let output_dim = h[3].parse().map_err(|_| bad("output_dim"))?;
        let spec = ModelSpec::new(kind, input_dim, output_dim)?;
        let params = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.trim()
                    .parse::<f64>()
                    .map_err(|_| bad(&format!("parameter {l:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::with_params(spec, params)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub shuffle: bool,
    /// Multiply the learning rate by `decay_factor` every `decay_every`
    /// epochs; 0 disables decay.
    pub decay_every: usize,
    pub decay_factor: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 1,
            learning_rate: 0.01,
            seed: 0,
            shuffle: true,
            decay_every: 0,
            decay_factor: 1.0,
        }
    }
}

impl TrainConfig {
    fn learning_rate_at(&self, epoch: usize) -> f64 {
        match epoch.checked_div(self.decay_every) {
            None => self.learning_rate,
            Some(steps) => self.learning_rate * self.decay_factor.powi(steps as i32),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean weighted training loss of each epoch, measured before each
    /// batch's update.
    pub loss_history: Vec<f64>,
    pub params: Vec<f64>,
    pub wall_time: Duration,
}

impl fmt::Display for TrainReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let last = self.loss_history.last().copied().unwrap_or(f64::NAN);
        write!(
            f,
            "{} epochs, final loss {last}, {:.3}s",
            self.loss_history.len(),
            self.wall_time.as_secs_f64()
        )
    }
}

/// Trains a zero-initialized model with plain mini-batch SGD.
///
/// With `loss.weighted` the table supplies one weight per sample; otherwise
/// every sample has weight 1 and `weights` is ignored. Each step moves the
/// parameters by the learning rate times the batch mean of
/// `weight_i * dL_i/dparams`.
pub fn train(
    spec: &ModelSpec,
    dataset: &Dataset,
    loss: &LossSpec,
    weights: Option<&WeightTable>,
    config: &TrainConfig,
) -> Result<(Model, TrainReport)> {
    let sample_weights = if loss.weighted {
        let table = weights
            .ok_or_else(|| Error::InvalidArgument("weighted loss needs a weight table".into()))?;
        if table.norm() != loss.norm {
            return Err(Error::InvalidArgument(format!(
                "weight table uses {} but loss asks for {}",
                table.norm(),
                loss.norm
            )));
        }
        table.weights()
    } else {
        vec![1.0; dataset.len()]
    };
    train_with_weights(
        Model::zeros(*spec),
        dataset,
        &loss.base,
        &sample_weights,
        config,
    )
}

/// SGD from an initial model with explicit per-sample weights.
pub fn train_with_weights(
    mut model: Model,
    dataset: &Dataset,
    loss: &BaseLoss,
    weights: &[f64],
    config: &TrainConfig,
) -> Result<(Model, TrainReport)> {
    let start = Instant::now();
    let spec = *model.spec();
    let n = dataset.len();
    validate_training(&spec, dataset, loss, weights, config)?;

    let basis: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            model
                .basis
                .map(dataset.feature_row(i).as_slice().expect("standard layout"))
        })
        .collect();
    let targets: Vec<Vec<f64>> = (0..n).map(|i| dataset.target_row(i).to_vec()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut grad = vec![0.0; model.params.len()];
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let lr = config.learning_rate_at(epoch);
        let mut epoch_loss = 0.0;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut batch_loss = 0.0;
            for &i in batch {
                let (eval, g) = model.grad_basis(&basis[i], &targets[i], loss)?;
                let w = weights[i];
                batch_loss += w * eval.value;
                grad.iter_mut().zip(g).for_each(|(a, g)| *a += w * g);
            }
            let denom = batch.len() as f64;
            model
                .params
                .iter_mut()
                .zip(&grad)
                .for_each(|(p, g)| *p -= lr * (g / denom));
            if !batch_loss.is_finite() || model.params.iter().any(|p| !p.is_finite()) {
                return Err(Error::Diverged {
                    epoch: epoch + 1,
                    batch: b + 1,
                });
            }
            epoch_loss += batch_loss;
        }
        history.push(epoch_loss / n as f64);
    }

    let report = TrainReport {
        loss_history: history,
        params: model.params.clone(),
        wall_time: start.elapsed(),
    };
    Ok((model, report))
}

fn validate_training(
    spec: &ModelSpec,
    dataset: &Dataset,
    loss: &BaseLoss,
    weights: &[f64],
    config: &TrainConfig,
) -> Result<()> {
    let n = dataset.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if dataset.n_features() != spec.input_dim {
        return Err(Error::DimensionMismatch {
            expected: spec.input_dim,
            actual: dataset.n_features(),
        });
    }
    if dataset.n_targets() != spec.output_dim {
        return Err(Error::DimensionMismatch {
            expected: spec.output_dim,
            actual: dataset.n_targets(),
        });
    }
    if weights.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: weights.len(),
        });
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidArgument(
            "sample weights must be finite and >= 0".into(),
        ));
    }
    if config.epochs == 0 || config.batch_size == 0 || config.batch_size > n {
        return Err(Error::InvalidArgument(format!(
            "need epochs >= 1 and 1 <= batch_size <= {n}, got epochs {} batch_size {}",
            config.epochs, config.batch_size
        )));
    }
    if !(config.learning_rate > 0.0 && config.learning_rate.is_finite()) {
        return Err(Error::InvalidArgument(
            "learning rate must be positive".into(),
        ));
    }
    if *loss == BaseLoss::Bce && spec.kind != ModelKind::Logistic {
        return Err(Error::InvalidArgument(
            "cross entropy needs a logistic model".into(),
        ));
    }
    if spec.kind == ModelKind::Logistic && dataset.targets().iter().any(|&t| t != 0.0 && t != 1.0) {
        return Err(Error::InvalidArgument(
            "logistic targets must be 0 or 1".into(),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{compute_weights, fit_grid, NormKind};

    #[test]
    fn univariate_basis() {
        assert_eq!(expand_polynomial(&[2.0], 3), vec![1.0, 2.0, 4.0, 8.0]);
    }

    #[test]
    fn bivariate_graded_lex() {
        let (a, b) = (3.0, 5.0);
        assert_eq!(
            expand_polynomial(&[a, b], 2),
            vec![1.0, a, b, a * a, a * b, b * b]
        );
        assert_eq!(monomial_exponents(2, 6).len(), 28);
        assert_eq!(monomial_exponents(3, 2).len(), 10);
    }

    #[test]
    fn simple_predictions() {
        let lin = Model::zeros(ModelSpec::new(ModelKind::Linear, 2, 1).unwrap());
        assert_eq!(lin.predict(&[4.0, -1.0]).unwrap(), vec![0.0]);
        let logit = Model::zeros(ModelSpec::new(ModelKind::Logistic, 2, 1).unwrap());
        assert_eq!(logit.predict(&[4.0, -1.0]).unwrap(), vec![0.5]);
        let hand = Model::with_params(
            ModelSpec::new(ModelKind::Linear, 1, 1).unwrap(),
            vec![2.0, 1.0],
        )
        .unwrap();
        assert_eq!(hand.predict(&[3.0]).unwrap(), vec![7.0]);
        assert!(hand.predict(&[3.0, 1.0]).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(ModelSpec::new(ModelKind::Logistic, 2, 2).is_err());
        assert!(ModelSpec::new(ModelKind::Polynomial { degree: 0 }, 1, 1).is_err());
        assert_eq!(
            ModelSpec::new(ModelKind::Polynomial { degree: 6 }, 1, 1)
                .unwrap()
                .n_params(),
            7
        );
        assert_eq!(
            "poly10".parse::<ModelKind>().unwrap(),
            ModelKind::Polynomial { degree: 10 }
        );
        assert!("poly0".parse::<ModelKind>().is_err());
    }

    fn line_data() -> Dataset {
        let xs: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 19.0]).collect();
        let ys: Vec<Vec<f64>> = xs.iter().map(|x| vec![2.0 * x[0] + 1.0]).collect();
        Dataset::from_rows(&xs, &ys).unwrap()
    }

    #[test]
    fn recovers_noiseless_line() {
        let d = line_data();
        let spec = ModelSpec::new(ModelKind::Linear, 1, 1).unwrap();
        let cfg = TrainConfig {
            epochs: 3000,
            batch_size: 4,
            learning_rate: 0.1,
            ..TrainConfig::default()
        };
        let (model, report) =
            train(&spec, &d, &LossSpec::unweighted(BaseLoss::Mse), None, &cfg).unwrap();
        assert_eq!(report.loss_history.len(), 3000);
        // closed-form least squares on noiseless data is exactly (2, 1)
        assert!((model.params()[0] - 2.0).abs() < 1e-3);
        assert!((model.params()[1] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn unit_weights_match_unweighted_bitwise() {
        let d = line_data();
        let spec = ModelSpec::new(ModelKind::Polynomial { degree: 3 }, 1, 1).unwrap();
        let cfg = TrainConfig {
            epochs: 20,
            batch_size: 3,
            seed: 4,
            ..TrainConfig::default()
        };
        let (a, ra) = train(&spec, &d, &LossSpec::unweighted(BaseLoss::Lqr), None, &cfg).unwrap();
        let (b, rb) = train_with_weights(
            Model::zeros(spec),
            &d,
            &BaseLoss::Lqr,
            &vec![1.0; d.len()],
            &cfg,
        )
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(ra.loss_history, rb.loss_history);
    }

    #[test]
    fn zero_weight_equals_removal_full_batch() {
        let d = line_data();
        let mut w = vec![1.0; d.len()];
        w[7] = 0.0;
        let spec = ModelSpec::new(ModelKind::Linear, 1, 1).unwrap();
        let keep: Vec<usize> = (0..d.len()).filter(|&i| i != 7).collect();
        let reduced = d.select_rows(&keep);
        // with the zeroed sample, the mean uses n; rescale rate so both step sizes agree
        let n = d.len() as f64;
        let cfg_full = TrainConfig {
            epochs: 5,
            batch_size: d.len(),
            learning_rate: 0.05 * n / (n - 1.0),
            shuffle: false,
            ..TrainConfig::default()
        };
        let cfg_reduced = TrainConfig {
            batch_size: reduced.len(),
            learning_rate: 0.05,
            ..cfg_full.clone()
        };
        let (a, _) =
            train_with_weights(Model::zeros(spec), &d, &BaseLoss::Mse, &w, &cfg_full).unwrap();
        let (b, _) = train_with_weights(
            Model::zeros(spec),
            &reduced,
            &BaseLoss::Mse,
            &vec![1.0; reduced.len()],
            &cfg_reduced,
        )
        .unwrap();
        for (p, q) in a.params().iter().zip(b.params()) {
            assert!((p - q).abs() < 1e-12, "{p} vs {q}");
        }
    }

    #[test]
    fn zero_weight_sample_has_no_influence() {
        let d = line_data();
        let mut corrupted_targets = d.targets().clone();
        corrupted_targets[[7, 0]] = 1e3;
        let corrupted = d.with_targets(corrupted_targets).unwrap();
        let mut w = vec![1.0; d.len()];
        w[7] = 0.0;
        let spec = ModelSpec::new(ModelKind::Linear, 1, 1).unwrap();
        let cfg = TrainConfig {
            epochs: 5,
            batch_size: d.len(),
            ..TrainConfig::default()
        };
        let (a, _) = train_with_weights(Model::zeros(spec), &d, &BaseLoss::Mse, &w, &cfg).unwrap();
        let (b, _) =
            train_with_weights(Model::zeros(spec), &corrupted, &BaseLoss::Mse, &w, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn deterministic_given_seed() {
        let d = line_data();
        let spec = ModelSpec::new(ModelKind::Polynomial { degree: 6 }, 1, 1).unwrap();
        let cfg = TrainConfig {
            epochs: 10,
            seed: 77,
            ..TrainConfig::default()
        };
        let loss = LossSpec::unweighted(BaseLoss::Huber { delta: 1.0 });
        let (_, a) = train(&spec, &d, &loss, None, &cfg).unwrap();
        let (_, b) = train(&spec, &d, &loss, None, &cfg).unwrap();
        assert_eq!(a.loss_history, b.loss_history);
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn divergence_reports_location() {
        let d = line_data();
        let spec = ModelSpec::new(ModelKind::Polynomial { degree: 6 }, 1, 1).unwrap();
        let cfg = TrainConfig {
            epochs: 50,
            learning_rate: 1e3,
            ..TrainConfig::default()
        };
        let err = train(&spec, &d, &LossSpec::unweighted(BaseLoss::Lqr), None, &cfg).unwrap_err();
        assert!(matches!(err, Error::Diverged { epoch: 1, .. }));
    }

    #[test]
    fn training_preconditions() {
        let d = line_data();
        let spec = ModelSpec::new(ModelKind::Linear, 1, 1).unwrap();
        let big_batch = TrainConfig {
            batch_size: 21,
            ..TrainConfig::default()
        };
        assert!(train(
            &spec,
            &d,
            &LossSpec::unweighted(BaseLoss::Mse),
            None,
            &big_batch
        )
        .is_err());
        let weighted = LossSpec::weighted(BaseLoss::Mse, NormKind::L2);
        assert!(train(&spec, &d, &weighted, None, &TrainConfig::default()).is_err());
        assert!(train(
            &spec,
            &d,
            &LossSpec::unweighted(BaseLoss::Bce),
            None,
            &TrainConfig::default()
        )
        .is_err());
        let logit = ModelSpec::new(ModelKind::Logistic, 1, 1).unwrap();
        assert!(train(
            &logit,
            &d,
            &LossSpec::unweighted(BaseLoss::Bce),
            None,
            &TrainConfig::default()
        )
        .is_err());

        let grid = fit_grid(&d, 2, &[0]).unwrap();
        let table = compute_weights(&grid, &d, NormKind::L1).unwrap();
        assert!(train(&spec, &d, &weighted, Some(&table), &TrainConfig::default()).is_err());
    }

    #[test]
    fn text_round_trip() {
        let spec = ModelSpec::new(ModelKind::Polynomial { degree: 3 }, 2, 1).unwrap();
        let params: Vec<f64> = (0..spec.n_params())
            .map(|i| (i as f64).sqrt() / 3.0 - 0.7)
            .collect();
        let m = Model::with_params(spec, params).unwrap();
        let text = m.to_text();
        assert!(text.starts_with("polynomial,3,2,1\n"));
        assert_eq!(Model::from_text(&text).unwrap(), m);
        assert!(Model::from_text("linear,0,1,1\n1.0\n").is_err());
    }
}
