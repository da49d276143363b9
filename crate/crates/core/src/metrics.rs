//! Regression and binary classification metrics.

use std::fmt;

use ndarray::Array2;

use crate::{Error, Result};

/// Denominator guard for percentage errors on zero targets.
pub const MAPE_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionReport {
    pub mape: f64,
    pub mae: f64,
    pub n: usize,
}

impl fmt::Display for RegressionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n={} mape={:.6} mae={:.6}", self.n, self.mape, self.mae)
    }
}

/// MAE and MAPE averaged over samples and output dimensions.
pub fn regression_metrics(y_hat: &Array2<f64>, y: &Array2<f64>) -> Result<RegressionReport> {
    if y_hat.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            actual: y_hat.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (mut abs, mut pct) = (0.0, 0.0);
    for (p, t) in y_hat.iter().zip(y.iter()) {
        let e = (p - t).abs();
        abs += e;
        pct += e / t.abs().max(MAPE_EPS);
    }
    let count = y.len() as f64;
    Ok(RegressionReport {
        mape: pct / count,
        mae: abs / count,
        n: y.nrows(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassificationReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ClassificationReport {
    /// Metrics from confusion counts; undefined ratios are reported as 0.
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            accuracy: ratio(tp + tn, tp + fp + tn + fn_),
            precision,
            recall,
            f1,
            tp,
            fp,
            tn,
            fn_,
        }
    }
}

impl fmt::Display for ClassificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "acc={:.4} prec={:.4} rec={:.4} f1={:.4} (tp={} fp={} tn={} fn={})",
            self.accuracy,
            self.precision,
            self.recall,
            self.f1,
            self.tp,
            self.fp,
            self.tn,
            self.fn_
        )
    }
}

/// Confusion-matrix metrics with class 1 as positive. A probability at or
/// above `threshold` predicts 1.
pub fn classification_metrics(
    prob: &[f64],
    y: &[f64],
    threshold: f64,
) -> Result<ClassificationReport> {
    if prob.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            actual: prob.len(),
        });
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold {threshold} not in (0, 1)"
        )));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&p, &t) in prob.iter().zip(y) {
        match (p >= threshold, t == 1.0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok(ClassificationReport::from_counts(tp, fp, tn, fn_))
}
