//! Full-batch gradient training of weighted linear classifiers.
//!
//! Objectives are weight-normalized: with `W = sum(w)`,
//!
//! ```text
//! logistic: (1/W) sum w_i [softplus(z_i) - y_i z_i] + (l2/2) |beta|^2
//! hinge:    (1/W) sum w_i max(0, 1 - s_i z_i)      + (l2/2) |beta|^2
//! ```
//!
//! where `z_i = beta . x_i + b` and `s_i = 2 y_i - 1`. The intercept is not
//! regularized. Normalizing by `W` makes a row of weight 2 equivalent to two
//! copies of the row with weight 1.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearParams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for LinearParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 500,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub epochs_run: usize,
    /// Objective before the first update and after every update.
    pub loss_trace: Vec<f64>,
}

impl LinearModel {
    pub fn margin(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.intercept
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearLoss {
    Logistic,
    Hinge,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Objective value and its (sub)gradient with respect to (weights, intercept).
pub fn objective_and_gradient(
    loss: LinearLoss,
    weights: &[f64],
    intercept: f64,
    ds: &Dataset,
    l2: f64,
) -> (f64, Vec<f64>, f64) {
    let total_w = ds.total_weight();
    let mut value = 0.0;
    let mut grad = vec![0.0; weights.len()];
    let mut grad_b = 0.0;
    for (i, x) in ds.rows().enumerate() {
        let w = ds.w()[i];
        let y = f64::from(ds.y()[i]);
        let z = dot(weights, x) + intercept;
        let (l, dz) = match loss {
            LinearLoss::Logistic => (softplus(z) - y * z, sigmoid(z) - y),
            LinearLoss::Hinge => {
                let s = 2.0 * y - 1.0;
                if s * z < 1.0 {
                    (1.0 - s * z, -s)
                } else {
                    (0.0, 0.0)
                }
            }
        };
        value += w * l;
        if dz != 0.0 {
            for (g, xj) in grad.iter_mut().zip(x) {
                *g += w * dz * xj;
            }
            grad_b += w * dz;
        }
    }
    value /= total_w;
    grad_b /= total_w;
    for (g, b) in grad.iter_mut().zip(weights) {
        *g = *g / total_w + l2 * b;
    }
    value += 0.5 * l2 * dot(weights, weights);
    (value, grad, grad_b)
}

/// Logistic objective only; see [`objective_and_gradient`].
pub fn logistic_objective(weights: &[f64], intercept: f64, ds: &Dataset, l2: f64) -> f64 {
    objective_and_gradient(LinearLoss::Logistic, weights, intercept, ds, l2).0
}

pub(crate) fn fit(loss: LinearLoss, params: &LinearParams, ds: &Dataset) -> LinearModel {
    let mut weights = vec![0.0; ds.n_features()];
    let mut intercept = 0.0;
    let mut loss_trace = Vec::with_capacity(params.epochs + 1);
    for _ in 0..params.epochs {
        let (value, grad, grad_b) = objective_and_gradient(loss, &weights, intercept, ds, params.l2);
        loss_trace.push(value);
        for (b, g) in weights.iter_mut().zip(&grad) {
            *b -= params.learning_rate * g;
        }
        intercept -= params.learning_rate * grad_b;
    }
    loss_trace.push(objective_and_gradient(loss, &weights, intercept, ds, params.l2).0);
    LinearModel {
        weights,
        intercept,
        epochs_run: params.epochs,
        loss_trace,
    }
}
