//! L2-regularized logistic regression trained by full-batch gradient descent.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 200,
            l2: 1e-4,
        }
    }
}

impl LogRegConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(
                "learning_rate must be positive".into(),
            ));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::InvalidConfig("l2 must be non-negative".into()));
        }
        Ok(())
    }
}

/// Weight vector and intercept of a linear scorer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearParams {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearParams {
    pub fn zeros(d: usize) -> Self {
        Self {
            weights: vec![0.0; d],
            bias: 0.0,
        }
    }

    #[inline]
    pub fn decision(&self, row: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(row)
            .map(|(w, x)| w * x)
            .sum::<f64>()
            + self.bias
    }

    /// Raw `w.x + b` for every row.
    pub fn margins(&self, rows: &Matrix) -> Result<Vec<f64>> {
        if rows.cols() != self.weights.len() {
            return Err(Error::ShapeMismatch {
                expected: self.weights.len(),
                got: rows.cols(),
            });
        }
        Ok(rows.row_iter().map(|r| self.decision(r)).collect())
    }

    pub fn norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
#[inline]
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub fn predict_proba(params: &LinearParams, rows: &Matrix) -> Result<Vec<f64>> {
    Ok(params.margins(rows)?.into_iter().map(sigmoid).collect())
}

/// Mean binary cross-entropy plus `l2/2 * |w|^2` (intercept unpenalized).
pub fn loss(params: &LinearParams, x: &Matrix, y: &[u8], l2: f64) -> f64 {
    let n = x.rows() as f64;
    let data: f64 = x
        .row_iter()
        .zip(y)
        .map(|(r, &yi)| {
            let z = params.decision(r);
            softplus(z) - yi as f64 * z
        })
        .sum();
    let reg: f64 = params.weights.iter().map(|w| w * w).sum();
    data / n + 0.5 * l2 * reg
}

/// Objective value and its exact gradient.
pub fn loss_and_gradient(
    params: &LinearParams,
    x: &Matrix,
    y: &[u8],
    l2: f64,
) -> (f64, LinearParams) {
    let n = x.rows() as f64;
    let mut grad = LinearParams::zeros(params.weights.len());
    let mut data = 0.0;
    for (r, &yi) in x.row_iter().zip(y) {
        let z = params.decision(r);
        data += softplus(z) - yi as f64 * z;
        let residual = sigmoid(z) - yi as f64;
        for (g, v) in grad.weights.iter_mut().zip(r) {
            *g += residual * v;
        }
        grad.bias += residual;
    }
    let mut reg = 0.0;
    for (g, w) in grad.weights.iter_mut().zip(&params.weights) {
        *g = *g / n + l2 * w;
        reg += w * w;
    }
    grad.bias /= n;
    (data / n + 0.5 * l2 * reg, grad)
}

const MONOTONE_SLACK: f64 = 1e-9;
const MIN_STEP: f64 = 1e-14;

/// Gradient descent from zero weights. A step that would raise the loss by
/// more than the slack is retried at half the rate (the halved rate is kept).
/// Returns the parameters and the loss after every epoch.
pub fn logreg_fit(train: &Dataset, config: &LogRegConfig) -> Result<(LinearParams, Vec<f64>)> {
    config.validate()?;
    let x = train.rows();
    let y = train.labels();
    let mut params = LinearParams::zeros(x.cols());
    let mut rate = config.learning_rate;
    let (mut current, mut grad) = loss_and_gradient(&params, x, y, config.l2);
    if !current.is_finite() {
        return Err(Error::NonFiniteLoss {
            model: "logreg".into(),
            epoch: 0,
        });
    }
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut accepted = false;
        while rate >= MIN_STEP {
            let candidate = LinearParams {
                weights: params
                    .weights
                    .iter()
                    .zip(&grad.weights)
                    .map(|(w, g)| w - rate * g)
                    .collect(),
                bias: params.bias - rate * grad.bias,
            };
            let (next, next_grad) = loss_and_gradient(&candidate, x, y, config.l2);
            if next.is_finite() && next <= current + MONOTONE_SLACK {
                params = candidate;
                current = next;
                grad = next_grad;
                accepted = true;
                break;
            }
            rate *= 0.5;
        }
        if !current.is_finite() {
            return Err(Error::NonFiniteLoss {
                model: "logreg".into(),
                epoch,
            });
        }
        history.push(current);
        if !accepted {
            // no admissible step remains; the optimum is reached to machine precision
            break;
        }
    }
    Ok((params, history))
}
