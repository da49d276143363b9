use std::fmt::Write as _;

use ndarray::{Array2, ArrayView1};

use super::Dataset;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnRange {
    pub min: f64,
    pub max: f64,
}

impl ColumnRange {
    fn forward(&self, v: f64) -> f64 {
        let range = self.max - self.min;
        if range > 0.0 {
            (v - self.min) / range
        } else {
            0.5
        }
    }

    fn inverse(&self, v: f64) -> f64 {
        let range = self.max - self.min;
        if range > 0.0 {
            v * range + self.min
        } else {
            self.min
        }
    }
}

/// Per-column min/max fitted on a subset of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationRecord {
    pub features: Vec<ColumnRange>,
    pub targets: Vec<ColumnRange>,
}

impl NormalizationRecord {
    /// Fits ranges reading only `rows`.
    pub fn fit(dataset: &Dataset, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let ranges = |m: &Array2<f64>| -> Vec<ColumnRange> {
            (0..m.ncols())
                .map(|c| {
                    rows.iter().fold(
                        ColumnRange {
                            min: f64::INFINITY,
                            max: f64::NEG_INFINITY,
                        },
                        |r, &i| ColumnRange {
                            min: r.min.min(m[[i, c]]),
                            max: r.max.max(m[[i, c]]),
                        },
                    )
                })
                .collect()
        };
        Ok(Self {
            features: ranges(dataset.features()),
            targets: ranges(dataset.targets()),
        })
    }

    /// Maps every column of `dataset` into the fitted ranges. Zero-range
    /// columns become 0.5.
    pub fn apply(&self, dataset: &Dataset) -> Result<Dataset> {
        self.check_shape(dataset)?;
        let x = map_columns(dataset.features(), &self.features, ColumnRange::forward);
        let y = map_columns(dataset.targets(), &self.targets, ColumnRange::forward);
        let mut out = Dataset::new(x, y)?.with_names(
            dataset.feature_names().to_vec(),
            dataset.target_names().to_vec(),
        )?;
        out.set_normalization(self.clone());
        Ok(out)
    }

    /// Maps normalized targets (or predictions) back to original units.
    pub fn inverse_targets(&self, targets: &Array2<f64>) -> Result<Array2<f64>> {
        if targets.ncols() != self.targets.len() {
            return Err(Error::DimensionMismatch {
                expected: self.targets.len(),
                actual: targets.ncols(),
            });
        }
        Ok(map_columns(targets, &self.targets, ColumnRange::inverse))
    }

    pub fn inverse_target_row(&self, row: ArrayView1<'_, f64>) -> Vec<f64> {
        row.iter()
            .zip(&self.targets)
            .map(|(&v, r)| r.inverse(v))
            .collect()
    }

    fn check_shape(&self, dataset: &Dataset) -> Result<()> {
        if dataset.n_features() != self.features.len() {
            return Err(Error::DimensionMismatch {
                expected: self.features.len(),
                actual: dataset.n_features(),
            });
        }
        if dataset.n_targets() != self.targets.len() {
            return Err(Error::DimensionMismatch {
                expected: self.targets.len(),
                actual: dataset.n_targets(),
            });
        }
        Ok(())
    }

    /// Text form: one `feature|target,column,min,max` line per column.
    pub fn to_text(&self) -> String {
        let mut s = String::from("kind,column,min,max\n");
        for (kind, cols) in [("feature", &self.features), ("target", &self.targets)] {
            for (i, r) in cols.iter().enumerate() {
                let _ = writeln!(s, "{kind},{i},{},{}", r.min, r.max);
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut rec = Self {
            features: Vec::new(),
            targets: Vec::new(),
        };
        for (lineno, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            let bad = || {
                Error::Parse(format!(
                    "normalization record line {}: {line:?}",
                    lineno + 1
                ))
            };
            if parts.len() != 4 {
                return Err(bad());
            }
            let min = parts[2].parse().map_err(|_| bad())?;
            let max = parts[3].parse().map_err(|_| bad())?;
            match parts[0] {
                "feature" => rec.features.push(ColumnRange { min, max }),
                "target" => rec.targets.push(ColumnRange { min, max }),
                _ => return Err(bad()),
            }
        }
        Ok(rec)
    }
}

fn map_columns(
    m: &Array2<f64>,
    ranges: &[ColumnRange],
    f: fn(&ColumnRange, f64) -> f64,
) -> Array2<f64> {
    let mut out = m.clone();
    for (c, r) in ranges.iter().enumerate() {
        out.column_mut(c).mapv_inplace(|v| f(r, v));
    }
    out
}

/// Min-max normalizes features and targets using statistics from `fit_on`
/// rows only; the other rows are transformed with the same record.
pub fn normalize_minmax(
    dataset: &Dataset,
    fit_on: &[usize],
) -> Result<(Dataset, NormalizationRecord)> {
    let record = NormalizationRecord::fit(dataset, fit_on)?;
    let out = record.apply(dataset)?;
    Ok((out, record))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(vals: &[f64]) -> Dataset {
        let rows: Vec<Vec<f64>> = vals.iter().map(|&v| vec![v]).collect();
        Dataset::from_rows(&rows, &rows).unwrap()
    }

    #[test]
    fn scales_to_unit_interval() {
        let d = column(&[0.0, 5.0, 10.0]);
        let (n, _) = normalize_minmax(&d, &[0, 1, 2]).unwrap();
        assert_eq!(n.features().column(0).to_vec(), vec![0.0, 0.5, 1.0]);
        assert!(n.normalization().is_some());
    }

    #[test]
    fn constant_column_maps_to_half() {
        let d = column(&[7.0, 7.0]);
        let (n, rec) = normalize_minmax(&d, &[0, 1]).unwrap();
        assert_eq!(n.targets().column(0).to_vec(), vec![0.5, 0.5]);
        assert_eq!(
            rec.inverse_targets(n.targets()).unwrap().column(0).to_vec(),
            vec![7.0, 7.0]
        );
    }

    #[test]
    fn round_trip() {
        let d = column(&[-3.25, 0.1, 17.0, 2.5e-3]);
        let (n, rec) = normalize_minmax(&d, &[0, 1, 2, 3]).unwrap();
        let back = rec.inverse_targets(n.targets()).unwrap();
        for (a, b) in back.iter().zip(d.targets().iter()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn fit_reads_only_fit_rows() {
        let a = column(&[0.0, 1.0, 2.0, 100.0]);
        let b = column(&[0.0, 1.0, 2.0, -55.0]);
        let ra = NormalizationRecord::fit(&a, &[0, 1, 2]).unwrap();
        let rb = NormalizationRecord::fit(&b, &[0, 1, 2]).unwrap();
        assert_eq!(ra, rb);
    }

    #[test]
    fn text_round_trip() {
        let d = Dataset::from_rows(
            &[vec![0.0, 1.0], vec![0.3, -2.0]],
            &[vec![5.0], vec![1.0 / 7.0]],
        )
        .unwrap();
        let rec = NormalizationRecord::fit(&d, &[0, 1]).unwrap();
        assert_eq!(NormalizationRecord::from_text(&rec.to_text()).unwrap(), rec);
    }

    #[test]
    fn empty_fit_rows() {
        assert!(NormalizationRecord::fit(&column(&[1.0]), &[]).is_err());
    }
}
