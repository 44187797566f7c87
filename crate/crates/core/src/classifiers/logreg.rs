//! Multinomial logistic regression trained by full-batch gradient descent.

use serde::{Deserialize, Serialize};

use super::{prepare_training_data, softmax, validate_input, ProbabilisticClassifier};
use crate::error::{Error, Result};
use crate::stats::Standardizer;

/// Hyperparameters for logistic regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogRParams {
    /// L2 penalty strength on the weights (biases are not penalized).
    pub l2: f64,
    pub learning_rate: f64,
    pub max_iters: usize,
}

impl Default for LogRParams {
    fn default() -> Self {
        Self {
            l2: 1e-4,
            learning_rate: 0.1,
            max_iters: 500,
        }
    }
}

/// Fitted softmax-regression model.
#[derive(Debug, Clone)]
pub struct LogRegModel {
    standardizer: Standardizer,
    /// Row-major `class_count x (dim + 1)`; the last column is the bias.
    weights: Vec<f64>,
    class_count: usize,
    dim: usize,
}

/// Mean cross-entropy plus L2 penalty, and its gradient, at `params`.
///
/// `params` is laid out row-major as `class_count x (dim + 1)` with the bias
/// in the last column of each row. Exposed so training can be verified
/// against finite differences.
pub fn logreg_loss_grad(
    params: &[f64],
    x: &[Vec<f64>],
    y: &[usize],
    class_count: usize,
    l2: f64,
) -> (f64, Vec<f64>) {
    let dim = x[0].len();
    let stride = dim + 1;
    assert_eq!(params.len(), class_count * stride, "parameter layout mismatch");

    let n = x.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; params.len()];
    let mut logits = vec![0.0; class_count];

    for (row, &label) in x.iter().zip(y) {
        for (k, logit) in logits.iter_mut().enumerate() {
            let w = &params[k * stride..(k + 1) * stride];
            let dot: f64 = w[..dim].iter().zip(row).map(|(wi, xi)| wi * xi).sum();
            *logit = dot + w[dim];
        }
        softmax(&mut logits);
        loss -= logits[label].max(1e-300).ln();
        for (k, &p) in logits.iter().enumerate() {
            let err = p - if k == label { 1.0 } else { 0.0 };
            let g = &mut grad[k * stride..(k + 1) * stride];
            for (gi, &xi) in g[..dim].iter_mut().zip(row) {
                *gi += err * xi;
            }
            g[dim] += err;
        }
    }

    loss /= n;
    for g in &mut grad {
        *g /= n;
    }
    // L2 on weights only, not biases.
    for k in 0..class_count {
        for d in 0..dim {
            let i = k * stride + d;
            loss += 0.5 * l2 * params[i] * params[i];
            grad[i] += l2 * params[i];
        }
    }
    (loss, grad)
}

/// Fit a softmax classifier with full-batch gradient descent.
///
/// The training loss must be non-increasing; a rise beyond numeric noise is
/// reported as divergence. The fit is deterministic (zero initialization;
/// the seed is accepted for contract uniformity).
pub fn fit_logistic_regression(
    x: &[Vec<f64>],
    y: &[usize],
    class_count: usize,
    params: &LogRParams,
    _seed: u64,
) -> Result<LogRegModel> {
    if !(params.learning_rate > 0.0) || params.l2 < 0.0 || params.max_iters == 0 {
        return Err(Error::InvalidConfig(format!(
            "logistic regression params out of range: lr {}, l2 {}, iters {}",
            params.learning_rate, params.l2, params.max_iters
        )));
    }
    let data = prepare_training_data(x, y, class_count)?;
    let dim = data.x[0].len();
    let stride = dim + 1;
    let mut weights = vec![0.0; class_count * stride];

    let mut prev_loss = f64::INFINITY;
    for _ in 0..params.max_iters {
        let (loss, grad) = logreg_loss_grad(&weights, &data.x, &data.y, class_count, params.l2);
        if !loss.is_finite() || loss > prev_loss + 1e-7 * (1.0 + prev_loss.abs()) {
            return Err(Error::Diverged(format!(
                "loss rose from {prev_loss} to {loss}; reduce the learning rate"
            )));
        }
        prev_loss = loss;
        for (w, g) in weights.iter_mut().zip(&grad) {
            *w -= params.learning_rate * g;
        }
    }

    Ok(LogRegModel {
        standardizer: data.standardizer,
        weights,
        class_count,
        dim,
    })
}

impl ProbabilisticClassifier for LogRegModel {
    fn class_count(&self) -> usize {
        self.class_count
    }

    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        let z = validate_input(x, &self.standardizer)?;
        let stride = self.dim + 1;
        let mut logits = vec![0.0; self.class_count];
        for (k, logit) in logits.iter_mut().enumerate() {
            let w = &self.weights[k * stride..(k + 1) * stride];
            let dot: f64 = w[..self.dim].iter().zip(&z).map(|(wi, xi)| wi * xi).sum();
            *logit = dot + w[self.dim];
        }
        softmax(&mut logits);
        Ok(logits)
    }
}
