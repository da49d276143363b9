use std::fmt::{self, Write as _};

use super::{CellGrid, Fingerprint};
use crate::data::Dataset;
use crate::{Error, Result};

/// Form of the abnormality score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NormKind {
    /// `sum_j |y_j - mean_j| / sigma_y`
    L1,
    /// `||y - mean||^2 / sigma_y^2`
    L2,
}

impl NormKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NormKind::L1 => "l1",
            NormKind::L2 => "l2",
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "l1" => Ok(NormKind::L1),
            "l2" => Ok(NormKind::L2),
            other => Err(Error::Parse(format!(
                "unknown gamma norm {other:?}, expected l1 or l2"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightOptions {
    pub norm: NormKind,
    /// Lower clamp on uniqueness. 0 keeps the literal ratio, so samples in
    /// zero-spread cells get weight 0.
    pub mu_floor: f64,
}

impl WeightOptions {
    pub fn new(norm: NormKind) -> Self {
        Self {
            norm,
            mu_floor: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleWeight {
    pub mu: f64,
    pub gamma: f64,
    /// `mu / (1 + gamma)`
    pub weight: f64,
}

/// Per-sample uniqueness, abnormality and weight, aligned with the dataset
/// the grid was fitted on.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTable {
    records: Vec<SampleWeight>,
    norm: NormKind,
    lambda: usize,
    fingerprint: Fingerprint,
}

impl WeightTable {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, i: usize) -> &SampleWeight {
        &self.records[i]
    }

    pub fn records(&self) -> &[SampleWeight] {
        &self.records
    }

    pub fn weights(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.weight).collect()
    }

    pub fn norm(&self) -> NormKind {
        self.norm
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn fingerprint(&self) -> &Fingerprint {
        &self.fingerprint
    }

    /// `index,mu,gamma,weight` table with a header row. Values are printed
    /// with round-trip precision.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,mu,gamma,weight\n");
        for (i, r) in self.records.iter().enumerate() {
            let _ = writeln!(s, "{i},{},{},{}", r.mu, r.gamma, r.weight);
        }
        s
    }

    /// Parses [`to_csv`](Self::to_csv) output. The fingerprint and lambda are
    /// not part of the text form; the caller supplies them.
    pub fn from_csv(
        text: &str,
        norm: NormKind,
        lambda: usize,
        fingerprint: Fingerprint,
    ) -> Result<Self> {
        let mut records = Vec::new();
        for (lineno, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let bad = || Error::Parse(format!("weight table line {}: {line:?}", lineno + 1));
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 4 || cols[0].parse::<usize>().ok() != Some(records.len()) {
                return Err(bad());
            }
            let f = |s: &str| s.parse::<f64>().map_err(|_| bad());
            records.push(SampleWeight {
                mu: f(cols[1])?,
                gamma: f(cols[2])?,
                weight: f(cols[3])?,
            });
        }
        Ok(Self {
            records,
            norm,
            lambda,
            fingerprint,
        })
    }
}

/// Weights with the literal uniqueness (no floor).
pub fn compute_weights(grid: &CellGrid, dataset: &Dataset, norm: NormKind) -> Result<WeightTable> {
    compute_weights_with(grid, dataset, &WeightOptions::new(norm))
}

/// Computes `mu`, `gamma` and `weight = mu / (1 + gamma)` for every sample of
/// the fitting dataset. A cell with `sigma_y = 0` gives `gamma = 0` to all of
/// its samples.
pub fn compute_weights_with(
    grid: &CellGrid,
    dataset: &Dataset,
    opts: &WeightOptions,
) -> Result<WeightTable> {
    let fp = Fingerprint::of(dataset);
    if &fp != grid.fingerprint() {
        return Err(Error::FingerprintMismatch {
            expected: grid.fingerprint().to_string(),
            actual: fp.to_string(),
        });
    }
    if !(opts.mu_floor >= 0.0 && opts.mu_floor.is_finite()) {
        return Err(Error::InvalidArgument(
            "mu_floor must be finite and >= 0".into(),
        ));
    }

    let mut records = Vec::with_capacity(dataset.len());
    for i in 0..dataset.len() {
        let x = dataset.feature_row(i);
        let id = grid.locate_cell(x.as_slice().expect("standard layout"))?;
        let cell = grid
            .cell(&id)
            .expect("fitting sample lands in a non-empty cell");
        let y = dataset.target_row(i);
        let gamma = if cell.sigma_y > 0.0 {
            match opts.norm {
                NormKind::L1 => {
                    y.iter()
                        .zip(&cell.y_mean)
                        .map(|(a, b)| (a - b).abs())
                        .sum::<f64>()
                        / cell.sigma_y
                }
                NormKind::L2 => {
                    y.iter()
                        .zip(&cell.y_mean)
                        .map(|(a, b)| (a - b).powi(2))
                        .sum::<f64>()
                        / (cell.sigma_y * cell.sigma_y)
                }
            }
        } else {
            0.0
        };
        let mu = cell.mu.max(opts.mu_floor);
        records.push(SampleWeight {
            mu,
            gamma,
            weight: mu / (1.0 + gamma),
        });
    }
    Ok(WeightTable {
        records,
        norm: opts.norm,
        lambda: grid.lambda(),
        fingerprint: fp,
    })
}
