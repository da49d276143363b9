//! Base losses with analytic gradients with respect to the prediction, and
//! the per-sample weighting wrapper.
//!
//! Every loss averages over the `v` output dimensions. Batches are reduced by
//! the mean of the per-sample weighted losses (see [`crate::models::train`]).

use std::fmt;
use std::str::FromStr;

use crate::grid::NormKind;
use crate::{Error, Result};

/// Probability clamp for cross entropy.
pub const BCE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaseLoss {
    Mse,
    Huber {
        delta: f64,
    },
    /// Quartic residual.
    Lqr,
    /// Binary cross entropy on a probability in (0, 1).
    Bce,
}

impl BaseLoss {
    pub fn huber(delta: f64) -> Result<Self> {
        if delta > 0.0 && delta.is_finite() {
            Ok(BaseLoss::Huber { delta })
        } else {
            Err(Error::InvalidArgument(format!(
                "huber delta must be > 0, got {delta}"
            )))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BaseLoss::Mse => "mse",
            BaseLoss::Huber { .. } => "huber",
            BaseLoss::Lqr => "lqr",
            BaseLoss::Bce => "bce",
        }
    }

    /// Loss value and its gradient with respect to `y_hat`.
    pub fn eval(&self, y_hat: &[f64], y: &[f64]) -> Result<LossEval> {
        if y_hat.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: y.len(),
                actual: y_hat.len(),
            });
        }
        if y.is_empty() {
            return Err(Error::InvalidArgument("empty target".into()));
        }
        let v = y.len() as f64;
        let residuals = y_hat.iter().zip(y).map(|(p, t)| p - t);
        let eval = match *self {
            BaseLoss::Mse => {
                let (value, grad) = fold(residuals, |r| (r * r, 2.0 * r));
                LossEval::scaled(value, grad, v)
            }
            BaseLoss::Lqr => {
                let (value, grad) = fold(residuals, |r| (r.powi(4), 4.0 * r.powi(3)));
                LossEval::scaled(value, grad, v)
            }
            BaseLoss::Huber { delta } => {
                let (value, grad) = fold(residuals, |r| {
                    if r.abs() < delta {
                        (0.5 * r * r, r)
                    } else {
                        (delta * r.abs() - 0.5 * delta * delta, delta * r.signum())
                    }
                });
                LossEval::scaled(value, grad, v)
            }
            BaseLoss::Bce => {
                if y.len() != 1 {
                    return Err(Error::InvalidArgument(format!(
                        "cross entropy needs a scalar target, got {} outputs",
                        y.len()
                    )));
                }
                let t = y[0];
                if !(0.0..=1.0).contains(&t) {
                    return Err(Error::InvalidArgument(format!(
                        "cross entropy label {t} outside [0, 1]"
                    )));
                }
                let p = y_hat[0].clamp(BCE_EPS, 1.0 - BCE_EPS);
                LossEval {
                    value: -(t * p.ln() + (1.0 - t) * (1.0 - p).ln()),
                    grad: vec![-t / p + (1.0 - t) / (1.0 - p)],
                }
            }
        };
        Ok(eval)
    }
}

impl fmt::Display for BaseLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaseLoss {
    type Err = Error;

    /// Huber parses with delta 1.0; use [`BaseLoss::huber`] for another delta.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mse" => Ok(BaseLoss::Mse),
            "huber" => Ok(BaseLoss::Huber { delta: 1.0 }),
            "lqr" => Ok(BaseLoss::Lqr),
            "bce" => Ok(BaseLoss::Bce),
            other => Err(Error::Parse(format!("unknown loss {other:?}"))),
        }
    }
}

fn fold(residuals: impl Iterator<Item = f64>, f: impl Fn(f64) -> (f64, f64)) -> (f64, Vec<f64>) {
    let mut value = 0.0;
    let mut grad = Vec::new();
    for r in residuals {
        let (l, g) = f(r);
        value += l;
        grad.push(g);
    }
    (value, grad)
}

/// Base loss plus weighting configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    pub base: BaseLoss,
    pub weighted: bool,
    pub norm: NormKind,
}

impl LossSpec {
    pub fn unweighted(base: BaseLoss) -> Self {
        Self {
            base,
            weighted: false,
            norm: NormKind::L2,
        }
    }

    pub fn weighted(base: BaseLoss, norm: NormKind) -> Self {
        Self {
            base,
            weighted: true,
            norm,
        }
    }

    /// `mse` for the plain loss, `viloss_mse` for the weighted one.
    pub fn label(&self) -> String {
        if self.weighted {
            format!("viloss_{}", self.base.name())
        } else {
            self.base.name().to_string()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossEval {
    pub value: f64,
    /// Derivative with respect to each predicted output.
    pub grad: Vec<f64>,
}

impl LossEval {
    fn scaled(sum: f64, mut grad: Vec<f64>, v: f64) -> Self {
        grad.iter_mut().for_each(|g| *g /= v);
        Self {
            value: sum / v,
            grad,
        }
    }
}

/// Evaluates the base loss of `spec`; the weighting flag is ignored here.
pub fn base_loss(spec: &LossSpec, y_hat: &[f64], y: &[f64]) -> Result<LossEval> {
    spec.base.eval(y_hat, y)
}

/// Scales value and gradient by a parameter-free sample weight.
pub fn weighted_loss(weight: f64, base: LossEval) -> LossEval {
    LossEval {
        value: weight * base.value,
        grad: base.grad.into_iter().map(|g| weight * g).collect(),
    }
}
