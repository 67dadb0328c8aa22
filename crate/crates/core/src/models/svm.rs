//! Linear soft-margin SVM trained with Pegasos-style stochastic subgradient steps.
//!
//! The intercept is carried as an extra weight on a constant feature, so the
//! objective is `lambda/2 * (|w|^2 + b^2) + mean_i max(0, 1 - y_i (w.x_i + b))`
//! with `y_i` in {-1, +1}.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::logreg::LinearParams;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvmConfig {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for LinearSvmConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-4,
            epochs: 100,
            seed: 0,
        }
    }
}

impl LinearSvmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig("lambda must be positive".into()));
        }
        Ok(())
    }
}

#[inline]
fn signed(y: u8) -> f64 {
    if y == 1 {
        1.0
    } else {
        -1.0
    }
}

pub fn objective(params: &LinearParams, x: &Matrix, y: &[u8], lambda: f64) -> f64 {
    let hinge: f64 = x
        .row_iter()
        .zip(y)
        .map(|(r, &yi)| (1.0 - signed(yi) * params.decision(r)).max(0.0))
        .sum();
    let sq = params.weights.iter().map(|w| w * w).sum::<f64>() + params.bias * params.bias;
    0.5 * lambda * sq + hinge / x.rows() as f64
}

/// Subgradient of `objective`; exact wherever no margin equals 1.
pub fn subgradient(params: &LinearParams, x: &Matrix, y: &[u8], lambda: f64) -> LinearParams {
    let n = x.rows() as f64;
    let mut g = LinearParams {
        weights: params.weights.iter().map(|w| lambda * w).collect(),
        bias: lambda * params.bias,
    };
    for (r, &yi) in x.row_iter().zip(y) {
        let ys = signed(yi);
        if ys * params.decision(r) < 1.0 {
            for (gw, v) in g.weights.iter_mut().zip(r) {
                *gw -= ys * v / n;
            }
            g.bias -= ys / n;
        }
    }
    g
}

pub fn svm_fit(train: &Dataset, config: &LinearSvmConfig) -> Result<LinearParams> {
    config.validate()?;
    let x = train.rows();
    let y = train.labels();
    let lambda = config.lambda;
    let radius = 1.0 / lambda.sqrt();
    let mut params = LinearParams::zeros(x.cols());
    let mut rng = seed::rng(config.seed);
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let mut t = 0u64;
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let row = x.row(i);
            let ys = signed(y[i]);
            let margin = ys * params.decision(row);
            let shrink = 1.0 - eta * lambda;
            params.weights.iter_mut().for_each(|w| *w *= shrink);
            params.bias *= shrink;
            if margin < 1.0 {
                for (w, v) in params.weights.iter_mut().zip(row) {
                    *w += eta * ys * v;
                }
                params.bias += eta * ys;
            }
            let norm = (params.norm().powi(2) + params.bias * params.bias).sqrt();
            if norm > radius {
                let s = radius / norm;
                params.weights.iter_mut().for_each(|w| *w *= s);
                params.bias *= s;
            }
        }
        if !params.weights.iter().all(|w| w.is_finite()) || !params.bias.is_finite() {
            return Err(Error::NonFiniteLoss {
                model: "svm".into(),
                epoch,
            });
        }
    }
    let final_objective = objective(&params, x, y, lambda);
    if !final_objective.is_finite() {
        return Err(Error::NonFiniteLoss {
            model: "svm".into(),
            epoch: config.epochs,
        });
    }
    Ok(params)
}
