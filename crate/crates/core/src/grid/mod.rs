//! Equal-width cell partitioning of feature space and the per-cell
//! statistics behind sample re-weighting.
//!
//! A [`CellGrid`] splits each selected feature dimension into `lambda`
//! equal-width bins over the fitting data's `[min, max]`. Bins are half-open
//! `[lo, hi)`, except the last which also holds the maximum. A sample's
//! [`CellId`] is its tuple of bin indices.
//!
//! For every non-empty cell we record the generalized standard deviation of
//! its selected features (`sigma_x`, Euclidean spread about the cell
//! centroid) and of its targets (`sigma_y`). Uniqueness is
//! `mu = sigma_x^2 / sigma_x_bar^2` where `sigma_x_bar` is the unweighted mean
//! of `sigma_x` over non-empty cells. If every cell has zero spread,
//! `sigma_x_bar = 0` and `mu` is 1 for every cell.
//!
//! Per-sample weights live in [`WeightTable`]; the localized-deviation score
//! and lambda selection live in [`localized_deviation`] and [`select_lambda`].

mod lambda;
mod weights;

pub use lambda::{localized_deviation, select_lambda, LambdaSweep, SweepRow};
pub use weights::{
    compute_weights, compute_weights_with, NormKind, SampleWeight, WeightOptions, WeightTable,
};

use std::collections::BTreeMap;
use std::fmt;

use sha2::{Digest, Sha256};

use crate::data::Dataset;
use crate::{Error, Result};

/// Bin index per selected dimension, in `feature_subset` order. Ordering is
/// lexicographic, so iterating a grid visits cells in ascending index order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellId(pub Vec<usize>);

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(usize::to_string).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellStats {
    pub count: usize,
    /// Centroid of the selected features.
    pub x_mean: Vec<f64>,
    pub sigma_x: f64,
    pub y_mean: Vec<f64>,
    pub sigma_y: f64,
    /// Uniqueness, shared by every sample in the cell.
    pub mu: f64,
}

/// Summary of a dataset used to detect that weights are being computed on
/// data other than what the grid was fitted on.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fingerprint(String);

impl Fingerprint {
    /// Hash of the row count, column counts and the min/max/sum of every
    /// feature and target column.
    pub fn of(dataset: &Dataset) -> Self {
        let mut h = Sha256::new();
        h.update((dataset.len() as u64).to_le_bytes());
        h.update((dataset.n_features() as u64).to_le_bytes());
        h.update((dataset.n_targets() as u64).to_le_bytes());
        for m in [dataset.features(), dataset.targets()] {
            for col in m.columns() {
                let (lo, hi, sum) = col.iter().fold(
                    (f64::INFINITY, f64::NEG_INFINITY, 0.0),
                    |(lo, hi, s), &v| (lo.min(v), hi.max(v), s + v),
                );
                for v in [lo, hi, sum] {
                    h.update(v.to_bits().to_le_bytes());
                }
            }
        }
        let digest = h.finalize();
        Fingerprint(digest.iter().take(8).map(|b| format!("{b:02x}")).collect())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A fitted partition with the statistics of every non-empty cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGrid {
    lambda: usize,
    feature_subset: Vec<usize>,
    bounds: Vec<(f64, f64)>,
    cells: BTreeMap<CellId, CellStats>,
    sigma_x_bar: f64,
    fingerprint: Fingerprint,
}

impl CellGrid {
    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn feature_subset(&self) -> &[usize] {
        &self.feature_subset
    }

    /// `(min, max)` of each selected dimension over the fitting data.
    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    /// Non-empty cells in ascending index order.
    pub fn cells(&self) -> &BTreeMap<CellId, CellStats> {
        &self.cells
    }

    pub fn cell(&self, id: &CellId) -> Option<&CellStats> {
        self.cells.get(id)
    }

    pub fn sigma_x_bar(&self) -> f64 {
        self.sigma_x_bar
    }

    pub fn fingerprint(&self) -> &Fingerprint {
        &self.fingerprint
    }

    /// Cell of an arbitrary feature vector. Coordinates outside the fitted
    /// bounds are clamped into the edge bins.
    pub fn locate_cell(&self, features: &[f64]) -> Result<CellId> {
        let needed = self.feature_subset.iter().max().map_or(0, |m| m + 1);
        if features.len() < needed {
            return Err(Error::DimensionMismatch {
                expected: needed,
                actual: features.len(),
            });
        }
        self.feature_subset
            .iter()
            .zip(&self.bounds)
            .map(|(&k, &(lo, hi))| {
                let x = features[k];
                if !x.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "non-finite coordinate in feature {k}"
                    )));
                }
                Ok(bin_index(x, lo, hi, self.lambda))
            })
            .collect::<Result<Vec<_>>>()
            .map(CellId)
    }
}

fn bin_index(x: f64, lo: f64, hi: f64, lambda: usize) -> usize {
    let range = hi - lo;
    if range.is_nan() || range <= 0.0 {
        return 0;
    }
    let pos = ((x - lo) / range * lambda as f64).floor();
    if pos <= 0.0 {
        0
    } else {
        (pos as usize).min(lambda - 1)
    }
}

/// Partitions `dataset` over the features in `feature_subset` into `lambda`
/// bins per dimension and computes every cell's statistics.
///
/// Runs one pass to assign cells and accumulate sums, then a second pass for
/// the deviations about each cell mean.
pub fn fit_grid(dataset: &Dataset, lambda: usize, feature_subset: &[usize]) -> Result<CellGrid> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if lambda == 0 {
        return Err(Error::InvalidArgument("lambda must be at least 1".into()));
    }
    validate_subset(feature_subset, dataset.n_features())?;

    let features = dataset.features();
    let targets = dataset.targets();
    for (i, (x, y)) in features.outer_iter().zip(targets.outer_iter()).enumerate() {
        if feature_subset.iter().any(|&k| !x[k].is_finite()) || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: i });
        }
    }

    let bounds: Vec<(f64, f64)> = feature_subset
        .iter()
        .map(|&k| {
            features
                .column(k)
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                })
        })
        .collect();

    let m = feature_subset.len();
    let v = dataset.n_targets();
    let mut grid = CellGrid {
        lambda,
        feature_subset: feature_subset.to_vec(),
        bounds,
        cells: BTreeMap::new(),
        sigma_x_bar: 0.0,
        fingerprint: Fingerprint::of(dataset),
    };

    // Pass 1: membership, counts and sums.
    let mut assignment = Vec::with_capacity(dataset.len());
    for i in 0..dataset.len() {
        let x = features.row(i);
        let id = CellId(
            feature_subset
                .iter()
                .zip(&grid.bounds)
                .map(|(&k, &(lo, hi))| bin_index(x[k], lo, hi, lambda))
                .collect(),
        );
        let cell = grid.cells.entry(id.clone()).or_insert_with(|| CellStats {
            count: 0,
            x_mean: vec![0.0; m],
            sigma_x: 0.0,
            y_mean: vec![0.0; v],
            sigma_y: 0.0,
            mu: 0.0,
        });
        cell.count += 1;
        for (s, &k) in cell.x_mean.iter_mut().zip(feature_subset) {
            *s += x[k];
        }
        for (s, &t) in cell.y_mean.iter_mut().zip(targets.row(i)) {
            *s += t;
        }
        assignment.push(id);
    }
    for cell in grid.cells.values_mut() {
        let n = cell.count as f64;
        cell.x_mean.iter_mut().for_each(|s| *s /= n);
        cell.y_mean.iter_mut().for_each(|s| *s /= n);
    }

    // Pass 2: squared deviations about the cell means.
    for (i, id) in assignment.iter().enumerate() {
        let cell = grid.cells.get_mut(id).expect("assigned in pass 1");
        let x = features.row(i);
        cell.sigma_x += feature_subset
            .iter()
            .zip(&cell.x_mean)
            .map(|(&k, c)| (x[k] - c).powi(2))
            .sum::<f64>();
        cell.sigma_y += targets
            .row(i)
            .iter()
            .zip(&cell.y_mean)
            .map(|(t, c)| (t - c).powi(2))
            .sum::<f64>();
    }
    for cell in grid.cells.values_mut() {
        let n = cell.count as f64;
        cell.sigma_x = (cell.sigma_x / n).sqrt();
        cell.sigma_y = (cell.sigma_y / n).sqrt();
    }

    grid.sigma_x_bar =
        grid.cells.values().map(|c| c.sigma_x).sum::<f64>() / grid.cells.len() as f64;
    let bar_sq = grid.sigma_x_bar * grid.sigma_x_bar;
    for cell in grid.cells.values_mut() {
        cell.mu = if bar_sq > 0.0 {
            cell.sigma_x * cell.sigma_x / bar_sq
        } else {
            1.0
        };
    }
    Ok(grid)
}

fn validate_subset(subset: &[usize], n_features: usize) -> Result<()> {
    if subset.is_empty() {
        return Err(Error::FeatureSubset("no features selected".into()));
    }
    for (i, &k) in subset.iter().enumerate() {
        if k >= n_features {
            return Err(Error::FeatureSubset(format!(
                "feature index {k} out of range for {n_features} features"
            )));
        }
        if subset[..i].contains(&k) {
            return Err(Error::FeatureSubset(format!("feature index {k} repeated")));
        }
    }
    Ok(())
}
