//! Reference implementations used by the integration tests.
#![allow(dead_code)]

use viloss::losses::BaseLoss;
use viloss::models::Model;

/// Brute-force cell statistics computed straight from the definitions,
/// sharing no code with the library.
pub struct OracleGrid {
    /// Bin vector of every sample.
    pub bins: Vec<Vec<usize>>,
    pub sigma_x: Vec<f64>,
    pub sigma_y: Vec<f64>,
    pub mu: Vec<f64>,
    pub gamma_l1: Vec<f64>,
    pub gamma_l2: Vec<f64>,
    pub sigma_x_bar: f64,
    pub ld: f64,
    pub nonempty: usize,
}

fn bin_of(x: f64, lo: f64, hi: f64, lambda: usize) -> usize {
    if hi == lo {
        return 0;
    }
    // count the interior boundaries at or below x
    let w = (hi - lo) / lambda as f64;
    (1..lambda).filter(|&k| x >= lo + k as f64 * w).count()
}

fn deviation(points: &[&Vec<f64>]) -> (Vec<f64>, f64) {
    let d = points[0].len();
    let n = points.len() as f64;
    let mut mean = vec![0.0; d];
    for p in points {
        for j in 0..d {
            mean[j] += p[j] / n;
        }
    }
    let mut ss = 0.0;
    for p in points {
        for j in 0..d {
            ss += (p[j] - mean[j]) * (p[j] - mean[j]);
        }
    }
    (mean, (ss / n).sqrt())
}

pub fn oracle_grid(
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
    lambda: usize,
    subset: &[usize],
) -> OracleGrid {
    let n = xs.len();
    let sel: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| subset.iter().map(|&j| x[j]).collect())
        .collect();
    let mut bins = vec![Vec::new(); n];
    for (k, _) in subset.iter().enumerate() {
        let lo = sel.iter().map(|x| x[k]).fold(f64::INFINITY, f64::min);
        let hi = sel.iter().map(|x| x[k]).fold(f64::NEG_INFINITY, f64::max);
        for i in 0..n {
            bins[i].push(bin_of(sel[i][k], lo, hi, lambda));
        }
    }
    let mut distinct: Vec<Vec<usize>> = bins.clone();
    distinct.sort();
    distinct.dedup();

    let mut sigma_x = vec![0.0; n];
    let mut sigma_y = vec![0.0; n];
    let mut gamma_l1 = vec![0.0; n];
    let mut gamma_l2 = vec![0.0; n];
    let mut cell_sigmas = Vec::new();
    for cell in &distinct {
        let members: Vec<usize> = (0..n).filter(|&i| &bins[i] == cell).collect();
        let (_, sx) = deviation(&members.iter().map(|&i| &sel[i]).collect::<Vec<_>>());
        let (ym, sy) = deviation(&members.iter().map(|&i| &ys[i]).collect::<Vec<_>>());
        cell_sigmas.push(sx);
        for &i in &members {
            sigma_x[i] = sx;
            sigma_y[i] = sy;
            if sy > 0.0 {
                let abs: f64 = ys[i].iter().zip(&ym).map(|(a, b)| (a - b).abs()).sum();
                let sq: f64 = ys[i].iter().zip(&ym).map(|(a, b)| (a - b) * (a - b)).sum();
                gamma_l1[i] = abs / sy;
                gamma_l2[i] = sq / (sy * sy);
            }
        }
    }
    let ld: f64 = cell_sigmas.iter().sum();
    let sigma_x_bar = ld / cell_sigmas.len() as f64;
    let mu = sigma_x
        .iter()
        .map(|s| {
            if sigma_x_bar > 0.0 {
                s * s / (sigma_x_bar * sigma_x_bar)
            } else {
                1.0
            }
        })
        .collect();
    OracleGrid {
        bins,
        sigma_x,
        sigma_y,
        mu,
        gamma_l1,
        gamma_l2,
        sigma_x_bar,
        ld,
        nonempty: distinct.len(),
    }
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Central-difference gradient of the base loss with respect to each
/// parameter.
pub fn finite_difference(model: &Model, x: &[f64], y: &[f64], loss: &BaseLoss, h: f64) -> Vec<f64> {
    let params = model.params().to_vec();
    (0..params.len())
        .map(|k| {
            let step = h * params[k].abs().max(1.0);
            let mut plus = params.clone();
            plus[k] += step;
            let mut minus = params.clone();
            minus[k] -= step;
            let f = |p: Vec<f64>| {
                let m = Model::with_params(*model.spec(), p).unwrap();
                m.param_gradient(x, y, loss).unwrap().0.value
            };
            (f(plus) - f(minus)) / (2.0 * step)
        })
        .collect()
}

/// Relative agreement with an absolute floor for roundoff in the loss value.
pub fn gradient_matches(analytic: f64, numeric: f64, rel: f64, loss_value: f64) -> bool {
    let floor = 1e-8 * loss_value.abs().max(1.0);
    (analytic - numeric).abs() <= rel * analytic.abs().max(numeric.abs()) + floor
}
