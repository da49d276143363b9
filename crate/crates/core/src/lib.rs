//! Variation-incentive loss re-weighting for regression.
//!
//! The feature space is cut into equal-width grid cells. Every training
//! sample receives a weight `mu / (1 + gamma)` where `mu` (uniqueness) is the
//! feature variance of its cell relative to the average cell, and `gamma`
//! (abnormality) is how far its target sits from the cell's target mean.
//! The weight scales a base loss (MSE, Huber, quartic or binary cross
//! entropy) and, because it does not depend on model parameters, scales the
//! gradient by the same factor.
//!
//! Modules:
//!
//! - [`grid`]: cell partitioning, cell statistics, per-sample weights and the
//!   localized-deviation score used to pick the number of divisions.
//! - [`losses`]: base losses with analytic gradients and the weighting wrapper.
//! - [`models`]: linear, polynomial and logistic predictors with a mini-batch
//!   SGD trainer.
//! - [`data`]: skewed synthetic data, CSV ingestion, min-max normalization and
//!   train/test splitting.
//! - [`metrics`]: MAPE/MAE and confusion-matrix metrics.
//! - [`experiment`]: config files, end-to-end runs and the bundled presets.

pub mod data;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod losses;
pub mod metrics;
pub mod models;

pub use error::{Error, Result};
