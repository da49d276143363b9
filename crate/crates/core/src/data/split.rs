use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::{Error, Result};

/// Train/test row indices. The train share is `round(n * fraction)`, kept
/// inside `[1, n - 1]` when `n >= 2`.
pub fn split_indices(
    n: usize,
    train_fraction: f64,
    seed: u64,
    shuffle: bool,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction {train_fraction} not in (0, 1)"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    if shuffle {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let mut n_train = (n as f64 * train_fraction).round() as usize;
    if n >= 2 {
        n_train = n_train.clamp(1, n - 1);
    }
    let test = order.split_off(n_train.min(n));
    Ok((order, test))
}

/// Seeded shuffle followed by a prefix split.
pub fn split(dataset: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(dataset.len(), train_fraction, seed, true)?;
    Ok((dataset.select_rows(&train), dataset.select_rows(&test)))
}

/// Prefix split in file order, for time series.
pub fn split_chronological(dataset: &Dataset, train_fraction: f64) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(dataset.len(), train_fraction, 0, false)?;
    Ok((dataset.select_rows(&train), dataset.select_rows(&test)))
}
