//! Multi-layer perceptron trained by full-batch gradient descent on
//! softmax cross-entropy.

use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{prepare_training_data, softmax, validate_input, ProbabilisticClassifier};
use crate::error::{Error, Result};
use crate::seeds::rng_from_seed;
use crate::stats::Standardizer;

/// Hidden-unit activation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    /// Leaky rectifier with the given negative-side slope.
    LeakyRelu { slope: f64 },
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu { slope } => {
                if z >= 0.0 {
                    z
                } else {
                    slope * z
                }
            }
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu { slope } => {
                if z >= 0.0 {
                    1.0
                } else {
                    slope
                }
            }
        }
    }
}

/// Hyperparameters for the perceptron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpParams {
    pub hidden_sizes: Vec<usize>,
    pub activation: Activation,
    pub learning_rate: f64,
    pub max_iters: usize,
    /// Standard deviation of the seeded Gaussian weight initialization.
    pub init_scale: f64,
    /// L2 penalty strength on the weights (biases are not penalized).
    pub l2: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden_sizes: vec![64],
            activation: Activation::LeakyRelu { slope: 0.01 },
            learning_rate: 0.05,
            max_iters: 800,
            init_scale: 0.1,
            l2: 1e-4,
        }
    }
}

/// Shapes of the dense layers: `dims = [input, hidden..., output]`.
///
/// Parameters are stored flat: for each layer, the weight matrix
/// (`out x in`, row-major) followed by the bias vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerLayout {
    dims: Vec<usize>,
}

impl LayerLayout {
    pub fn new(input: usize, hidden: &[usize], output: usize) -> Self {
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(input);
        dims.extend_from_slice(hidden);
        dims.push(output);
        Self { dims }
    }

    pub fn layer_count(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.dims
            .windows(2)
            .map(|pair| pair[0] * pair[1] + pair[1])
            .sum()
    }

    /// Offset of layer `l`'s weights and biases in the flat vector.
    fn offsets(&self, layer: usize) -> (usize, usize, usize, usize) {
        let mut offset = 0;
        for l in 0..layer {
            offset += self.dims[l] * self.dims[l + 1] + self.dims[l + 1];
        }
        let fan_in = self.dims[layer];
        let fan_out = self.dims[layer + 1];
        (offset, offset + fan_in * fan_out, fan_in, fan_out)
    }
}

/// Mean cross-entropy plus L2 penalty, and its gradient, at `params`.
///
/// Exposed so training can be verified against finite differences.
pub fn mlp_loss_grad(
    params: &[f64],
    layout: &LayerLayout,
    activation: Activation,
    x: &[Vec<f64>],
    y: &[usize],
    l2: f64,
) -> (f64, Vec<f64>) {
    assert_eq!(params.len(), layout.param_count(), "parameter layout mismatch");
    let layers = layout.layer_count();
    let n = x.len() as f64;

    let mut loss = 0.0;
    let mut grad = vec![0.0; params.len()];
    // Pre-activations and activations per layer, reused across examples.
    let mut pre: Vec<Vec<f64>> = layout.dims[1..].iter().map(|&d| vec![0.0; d]).collect();
    let mut act: Vec<Vec<f64>> = layout.dims[1..].iter().map(|&d| vec![0.0; d]).collect();
    let mut delta: Vec<Vec<f64>> = layout.dims[1..].iter().map(|&d| vec![0.0; d]).collect();

    for (row, &label) in x.iter().zip(y) {
        // Forward pass.
        for layer in 0..layers {
            let (w0, b0, fan_in, fan_out) = layout.offsets(layer);
            let input: &[f64] = if layer == 0 { row } else { &act[layer - 1] };
            let weights = &params[w0..w0 + fan_in * fan_out];
            let biases = &params[b0..b0 + fan_out];
            for (j, (w_row, &b)) in weights.chunks_exact(fan_in).zip(biases).enumerate() {
                let dot: f64 = w_row.iter().zip(input).map(|(w, v)| w * v).sum();
                pre[layer][j] = dot + b;
            }
            if layer + 1 < layers {
                for j in 0..fan_out {
                    act[layer][j] = activation.apply(pre[layer][j]);
                }
            } else {
                act[layer].copy_from_slice(&pre[layer]);
                softmax(&mut act[layer]);
            }
        }
        loss -= act[layers - 1][label].max(1e-300).ln();

        // Backward pass: delta holds dLoss/dPreactivation (per example).
        for (j, d) in delta[layers - 1].iter_mut().enumerate() {
            *d = act[layers - 1][j] - if j == label { 1.0 } else { 0.0 };
        }
        for layer in (0..layers).rev() {
            let (w0, b0, fan_in, fan_out) = layout.offsets(layer);
            let input: &[f64] = if layer == 0 { row } else { &act[layer - 1] };
            {
                let g = &mut grad[w0..w0 + fan_in * fan_out];
                for (j, g_row) in g.chunks_exact_mut(fan_in).enumerate() {
                    let d = delta[layer][j];
                    for (gi, &vi) in g_row.iter_mut().zip(input) {
                        *gi += d * vi;
                    }
                }
            }
            for (j, gb) in grad[b0..b0 + fan_out].iter_mut().enumerate() {
                *gb += delta[layer][j];
            }
            if layer > 0 {
                let weights = &params[w0..w0 + fan_in * fan_out];
                let (upper, lower) = delta.split_at_mut(layer);
                let d_out = &lower[0];
                let d_in = &mut upper[layer - 1];
                for (i, di) in d_in.iter_mut().enumerate() {
                    let mut sum = 0.0;
                    for j in 0..fan_out {
                        sum += weights[j * fan_in + i] * d_out[j];
                    }
                    *di = sum * activation.derivative(pre[layer - 1][i]);
                }
            }
        }
    }

    loss /= n;
    for g in &mut grad {
        *g /= n;
    }
    // L2 on weight matrices only.
    for layer in 0..layers {
        let (w0, b0, _, _) = layout.offsets(layer);
        for i in w0..b0 {
            loss += 0.5 * l2 * params[i] * params[i];
            grad[i] += l2 * params[i];
        }
    }
    (loss, grad)
}

/// Fitted multi-layer perceptron.
#[derive(Debug, Clone)]
pub struct MlpModel {
    standardizer: Standardizer,
    layout: LayerLayout,
    activation: Activation,
    params: Vec<f64>,
    class_count: usize,
}

fn init_params(layout: &LayerLayout, init_scale: f64, rng: &mut ChaCha12Rng) -> Vec<f64> {
    let normal = Normal::new(0.0, init_scale).expect("positive init scale");
    let mut params = vec![0.0; layout.param_count()];
    for layer in 0..layout.layer_count() {
        let (w0, b0, _, _) = layout.offsets(layer);
        for w in &mut params[w0..b0] {
            *w = normal.sample(rng);
        }
        // Biases start at zero.
    }
    params
}

/// Fit the perceptron with seeded initialization and full-batch descent.
pub fn fit_mlp(
    x: &[Vec<f64>],
    y: &[usize],
    class_count: usize,
    params: &MlpParams,
    seed: u64,
) -> Result<MlpModel> {
    if params.hidden_sizes.is_empty() || params.hidden_sizes.iter().any(|&h| h == 0) {
        return Err(Error::InvalidConfig(
            "mlp needs at least one non-empty hidden layer".into(),
        ));
    }
    if !(params.learning_rate > 0.0)
        || !(params.init_scale > 0.0)
        || params.l2 < 0.0
        || params.max_iters == 0
    {
        return Err(Error::InvalidConfig(format!(
            "mlp params out of range: lr {}, init {}, l2 {}, iters {}",
            params.learning_rate, params.init_scale, params.l2, params.max_iters
        )));
    }
    if let Activation::LeakyRelu { slope } = params.activation {
        if !(0.0..1.0).contains(&slope) {
            return Err(Error::InvalidConfig(format!(
                "leaky slope {slope} must be in [0, 1)"
            )));
        }
    }

    let data = prepare_training_data(x, y, class_count)?;
    let layout = LayerLayout::new(data.x[0].len(), &params.hidden_sizes, class_count);
    let mut rng = rng_from_seed(seed);
    let mut weights = init_params(&layout, params.init_scale, &mut rng);

    let mut prev_loss = f64::INFINITY;
    for _ in 0..params.max_iters {
        let (loss, grad) = mlp_loss_grad(
            &weights,
            &layout,
            params.activation,
            &data.x,
            &data.y,
            params.l2,
        );
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

    Ok(MlpModel {
        standardizer: data.standardizer,
        layout,
        activation: params.activation,
        params: weights,
        class_count,
    })
}

impl MlpModel {
    /// Flat parameter vector, mainly for determinism checks.
    pub fn parameters(&self) -> &[f64] {
        &self.params
    }
}

impl ProbabilisticClassifier for MlpModel {
    fn class_count(&self) -> usize {
        self.class_count
    }

    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        let z = validate_input(x, &self.standardizer)?;
        let layers = self.layout.layer_count();
        let mut current = z;
        for layer in 0..layers {
            let (w0, b0, fan_in, fan_out) = self.layout.offsets(layer);
            let weights = &self.params[w0..w0 + fan_in * fan_out];
            let biases = &self.params[b0..b0 + fan_out];
            let mut next = vec![0.0; fan_out];
            for (j, (w_row, &b)) in weights.chunks_exact(fan_in).zip(biases).enumerate() {
                let dot: f64 = w_row.iter().zip(&current).map(|(w, v)| w * v).sum();
                next[j] = dot + b;
            }
            if layer + 1 < layers {
                for v in &mut next {
                    *v = self.activation.apply(*v);
                }
            } else {
                softmax(&mut next);
            }
            current = next;
        }
        Ok(current)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::test_support::training_accuracy;
    use crate::seeds::rng_from_seed;
    use rand::Rng;

    fn xor_blobs(per_cluster: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = rng_from_seed(seed);
        let centers = [
            ([0.0, 0.0], 0),
            ([4.0, 4.0], 0),
            ([0.0, 4.0], 1),
            ([4.0, 0.0], 1),
        ];
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (center, label) in centers {
            for _ in 0..per_cluster {
                x.push(vec![
                    center[0] + rng.random::<f64>() * 0.8 - 0.4,
                    center[1] + rng.random::<f64>() * 0.8 - 0.4,
                ]);
                y.push(label);
            }
        }
        (x, y)
    }

    #[test]
    fn xor_arrangement_is_learned() {
        let (x, y) = xor_blobs(12, 9);
        let model = fit_mlp(&x, &y, 2, &MlpParams::default(), 1).unwrap();
        assert!(training_accuracy(&model, &x, &y) >= 0.95);
    }

    #[test]
    fn same_seed_gives_identical_weights() {
        let (x, y) = xor_blobs(6, 2);
        let params = MlpParams {
            max_iters: 50,
            ..MlpParams::default()
        };
        let a = fit_mlp(&x, &y, 2, &params, 7).unwrap();
        let b = fit_mlp(&x, &y, 2, &params, 7).unwrap();
        assert_eq!(a.parameters(), b.parameters());
        let c = fit_mlp(&x, &y, 2, &params, 8).unwrap();
        assert_ne!(a.parameters(), c.parameters());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = rng_from_seed(31);
        let n = 10;
        let dim = 4;
        let k = 3;
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
            .collect();
        let y: Vec<usize> = (0..n).map(|i| i % k).collect();
        let layout = LayerLayout::new(dim, &[5], k);
        let activation = Activation::LeakyRelu { slope: 0.01 };
        let params: Vec<f64> = (0..layout.param_count())
            .map(|_| rng.random::<f64>() - 0.5)
            .collect();

        let (_, grad) = mlp_loss_grad(&params, &layout, activation, &x, &y, 1e-3);
        let step = 1e-5;
        for i in 0..params.len() {
            let mut plus = params.clone();
            plus[i] += step;
            let mut minus = params.clone();
            minus[i] -= step;
            let (lp, _) = mlp_loss_grad(&plus, &layout, activation, &x, &y, 1e-3);
            let (lm, _) = mlp_loss_grad(&minus, &layout, activation, &x, &y, 1e-3);
            let fd = (lp - lm) / (2.0 * step);
            let rel = (grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1e-8);
            assert!(rel < 1e-4, "param {i}: analytic {} vs fd {fd}", grad[i]);
        }
    }

    #[test]
    fn two_hidden_layers_work() {
        let (x, y) = xor_blobs(10, 4);
        let params = MlpParams {
            hidden_sizes: vec![16, 8],
            max_iters: 600,
            ..MlpParams::default()
        };
        let model = fit_mlp(&x, &y, 2, &params, 3).unwrap();
        assert!(training_accuracy(&model, &x, &y) >= 0.95);
    }

    #[test]
    fn simplex_property() {
        let (x, y) = xor_blobs(6, 6);
        let params = MlpParams {
            max_iters: 100,
            ..MlpParams::default()
        };
        let model = fit_mlp(&x, &y, 2, &params, 3).unwrap();
        let mut rng = rng_from_seed(12);
        for _ in 0..100 {
            let q = vec![rng.random::<f64>() * 8.0 - 2.0, rng.random::<f64>() * 8.0 - 2.0];
            let p = model.predict_proba(&q).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(p.iter().all(|&v| v >= 0.0));
        }
        assert!(model.predict_proba(&[f64::NAN, 0.0]).is_err());
    }
}
