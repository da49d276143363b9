//! Datasets: synthetic generation, CSV ingestion, min-max normalization and
//! train/test splitting.

mod csv_io;
mod normalize;
mod split;
mod synth;

pub use csv_io::{load_csv, write_csv, ColumnRef, LoadReport, RejectedRow};
pub use normalize::{normalize_minmax, ColumnRange, NormalizationRecord};
pub use split::{split, split_chronological, split_indices};
pub use synth::{
    generate_binary, generate_synth, generate_synth_traced, ground_truth, BiasMixture,
    BinarySynthSpec, SynthSpec, SynthVariant,
};

use ndarray::{Array2, ArrayView1, Axis};

use crate::{Error, Result};

/// Samples as an `n x m` feature matrix and an `n x v` target matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    targets: Array2<f64>,
    feature_names: Vec<String>,
    target_names: Vec<String>,
    normalization: Option<NormalizationRecord>,
}

impl Dataset {
    /// Builds a dataset, rejecting mismatched row counts and non-finite values.
    pub fn new(features: Array2<f64>, targets: Array2<f64>) -> Result<Self> {
        if features.nrows() != targets.nrows() {
            return Err(Error::DimensionMismatch {
                expected: features.nrows(),
                actual: targets.nrows(),
            });
        }
        for (i, (x, y)) in features.outer_iter().zip(targets.outer_iter()).enumerate() {
            if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { index: i });
            }
        }
        let feature_names = (1..=features.ncols()).map(|k| format!("x{k}")).collect();
        let target_names = if targets.ncols() == 1 {
            vec!["y".to_string()]
        } else {
            (1..=targets.ncols()).map(|k| format!("y{k}")).collect()
        };
        Ok(Self {
            features,
            targets,
            feature_names,
            target_names,
            normalization: None,
        })
    }

    /// Convenience constructor from row vectors.
    pub fn from_rows(features: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<Self> {
        let m = features.first().map_or(0, Vec::len);
        let v = targets.first().map_or(0, Vec::len);
        let x = rows_to_array(features, m)?;
        let y = rows_to_array(targets, v)?;
        Self::new(x, y)
    }

    pub fn with_names(
        mut self,
        feature_names: Vec<String>,
        target_names: Vec<String>,
    ) -> Result<Self> {
        if feature_names.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                actual: feature_names.len(),
            });
        }
        if target_names.len() != self.n_targets() {
            return Err(Error::DimensionMismatch {
                expected: self.n_targets(),
                actual: target_names.len(),
            });
        }
        self.feature_names = feature_names;
        self.target_names = target_names;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_targets(&self) -> usize {
        self.targets.ncols()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn targets(&self) -> &Array2<f64> {
        &self.targets
    }

    pub fn feature_row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    pub fn target_row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.targets.row(i)
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn target_names(&self) -> &[String] {
        &self.target_names
    }

    /// Min/max record if this dataset was produced by [`normalize_minmax`].
    pub fn normalization(&self) -> Option<&NormalizationRecord> {
        self.normalization.as_ref()
    }

    /// New dataset holding the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), rows),
            targets: self.targets.select(Axis(0), rows),
            feature_names: self.feature_names.clone(),
            target_names: self.target_names.clone(),
            normalization: self.normalization.clone(),
        }
    }

    /// Replaces the target matrix, e.g. with model predictions.
    pub fn with_targets(&self, targets: Array2<f64>) -> Result<Dataset> {
        if targets.dim() != self.targets.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.targets.len(),
                actual: targets.len(),
            });
        }
        let mut out = self.clone();
        out.targets = targets;
        Ok(out)
    }

    pub(crate) fn set_normalization(&mut self, record: NormalizationRecord) {
        self.normalization = Some(record);
    }
}

fn rows_to_array(rows: &[Vec<f64>], width: usize) -> Result<Array2<f64>> {
    let mut flat = Vec::with_capacity(rows.len() * width);
    for row in rows {
        if row.len() != width {
            return Err(Error::DimensionMismatch {
                expected: width,
                actual: row.len(),
            });
        }
        flat.extend_from_slice(row);
    }
    Array2::from_shape_vec((rows.len(), width), flat)
        .map_err(|e| Error::InvalidArgument(e.to_string()))
}
