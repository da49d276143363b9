use std::fmt::Write as _;

use super::{fit_grid, CellGrid};
use crate::data::Dataset;
use crate::{Error, Result};

/// Sum of `sigma_x` over the non-empty cells.
pub fn localized_deviation(grid: &CellGrid) -> f64 {
    grid.cells().values().map(|c| c.sigma_x).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub lambda: usize,
    pub ld: f64,
    pub nonempty_cells: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSweep {
    pub best: usize,
    pub rows: Vec<SweepRow>,
}

impl LambdaSweep {
    /// `lambda,ld,nonempty_cells` table with a header row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("lambda,ld,nonempty_cells\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{}", r.lambda, r.ld, r.nonempty_cells);
        }
        s
    }
}

/// Fits a grid per candidate and picks the one with the largest localized
/// deviation. Ties go to the smaller lambda.
pub fn select_lambda(
    dataset: &Dataset,
    candidates: &[usize],
    feature_subset: &[usize],
) -> Result<LambdaSweep> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no lambda candidates".into()));
    }
    let mut rows = Vec::with_capacity(candidates.len());
    for &lambda in candidates {
        let grid = fit_grid(dataset, lambda, feature_subset)?;
        rows.push(SweepRow {
            lambda,
            ld: localized_deviation(&grid),
            nonempty_cells: grid.cells().len(),
        });
    }
    let best = rows
        .iter()
        .fold(None::<&SweepRow>, |best, r| match best {
            Some(b) if b.ld > r.ld || (b.ld == r.ld && b.lambda <= r.lambda) => Some(b),
            _ => Some(r),
        })
        .expect("non-empty candidates")
        .lambda;
    Ok(LambdaSweep { best, rows })
}
