//! Probabilistic classifiers behind a single contract: fit on labeled
//! feature rows, emit posterior distributions over a fixed class count.
//!
//! Three from-scratch algorithms are provided: multinomial logistic
//! regression, a multi-layer perceptron, and a random forest. All fits
//! z-score features on the training set (RMS and Hz features differ by
//! orders of magnitude) and canonically sort training rows so full-batch
//! results do not depend on input order.

mod forest;
mod logreg;
mod mlp;

pub use forest::{fit_random_forest, ForestParams, RandomForestModel};
pub use logreg::{fit_logistic_regression, logreg_loss_grad, LogRegModel, LogRParams};
pub use mlp::{fit_mlp, mlp_loss_grad, Activation, MlpModel, MlpParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::Standardizer;

/// Posterior-emitting classifier over `class_count` classes.
pub trait ProbabilisticClassifier {
    fn class_count(&self) -> usize;

    /// Posterior distribution over the classes; non-negative, sums to 1.
    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Argmax of the posterior with the lowest-index tie-break.
    fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.predict_proba(x)?))
    }
}

/// Index of the maximum value, ties broken toward the lower index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Which classifier algorithm to use for every head of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    LogR,
    Mlp,
    RandomForest,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::LogR, Algorithm::Mlp, Algorithm::RandomForest];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::LogR => "logr",
            Algorithm::Mlp => "mlp",
            Algorithm::RandomForest => "rf",
        }
    }
}

/// Hyperparameters for all three algorithms, with the defaults used by the
/// experiment harnesses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ClassifierParams {
    pub logr: LogRParams,
    pub mlp: MlpParams,
    pub forest: ForestParams,
}

/// A fitted classifier of any algorithm.
#[derive(Debug, Clone)]
pub enum TrainedClassifier {
    LogR(LogRegModel),
    Mlp(MlpModel),
    Forest(RandomForestModel),
}

impl TrainedClassifier {
    /// Fit `algorithm` on the given rows. `class_count` fixes the output
    /// arity; every label must be below it.
    pub fn fit(
        algorithm: Algorithm,
        x: &[Vec<f64>],
        y: &[usize],
        class_count: usize,
        params: &ClassifierParams,
        seed: u64,
    ) -> Result<Self> {
        match algorithm {
            Algorithm::LogR => Ok(TrainedClassifier::LogR(fit_logistic_regression(
                x,
                y,
                class_count,
                &params.logr,
                seed,
            )?)),
            Algorithm::Mlp => Ok(TrainedClassifier::Mlp(fit_mlp(
                x,
                y,
                class_count,
                &params.mlp,
                seed,
            )?)),
            Algorithm::RandomForest => Ok(TrainedClassifier::Forest(fit_random_forest(
                x,
                y,
                class_count,
                &params.forest,
                seed,
            )?)),
        }
    }
}

impl ProbabilisticClassifier for TrainedClassifier {
    fn class_count(&self) -> usize {
        match self {
            TrainedClassifier::LogR(m) => m.class_count(),
            TrainedClassifier::Mlp(m) => m.class_count(),
            TrainedClassifier::Forest(m) => m.class_count(),
        }
    }

    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            TrainedClassifier::LogR(m) => m.predict_proba(x),
            TrainedClassifier::Mlp(m) => m.predict_proba(x),
            TrainedClassifier::Forest(m) => m.predict_proba(x),
        }
    }
}

/// Validated, canonically ordered, standardized training data.
pub(crate) struct PreparedData {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<usize>,
    pub standardizer: Standardizer,
}

/// Validate a training set and bring it into canonical form.
///
/// Rows are sorted lexicographically by features then label, so the fit of
/// any full-batch algorithm (and the bootstrap draws of the forest) is
/// invariant to the order in which training rows arrive.
pub(crate) fn prepare_training_data(
    x: &[Vec<f64>],
    y: &[usize],
    class_count: usize,
) -> Result<PreparedData> {
    if x.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "{} feature rows vs {} labels",
            x.len(),
            y.len()
        )));
    }
    if class_count < 2 {
        return Err(Error::InvalidInput(format!(
            "class_count {class_count} must be at least 2"
        )));
    }
    let dim = x[0].len();
    if dim == 0 {
        return Err(Error::InvalidInput("zero-dimensional features".into()));
    }
    for row in x {
        if row.len() != dim {
            return Err(Error::InvalidInput("inconsistent feature dimensions".into()));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite feature value".into()));
        }
    }
    if let Some(&bad) = y.iter().find(|&&label| label >= class_count) {
        return Err(Error::InvalidInput(format!(
            "label {bad} out of range 0..{class_count}"
        )));
    }
    let first = y[0];
    if y.iter().all(|&label| label == first) {
        return Err(Error::DegenerateFit(format!(
            "all {} training rows share class {first}",
            y.len()
        )));
    }

    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| {
        let row_cmp = x[a]
            .iter()
            .zip(&x[b])
            .map(|(va, vb)| va.partial_cmp(vb).expect("validated finite"))
            .find(|c| c.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal);
        row_cmp.then(y[a].cmp(&y[b]))
    });

    let sorted_x: Vec<Vec<f64>> = order.iter().map(|&i| x[i].clone()).collect();
    let sorted_y: Vec<usize> = order.iter().map(|&i| y[i]).collect();
    let standardizer = Standardizer::fit(&sorted_x)?;
    let z = standardizer.transform_all(&sorted_x);
    Ok(PreparedData {
        x: z,
        y: sorted_y,
        standardizer,
    })
}

/// Validate one inference row against a model's standardizer.
pub(crate) fn validate_input(x: &[f64], standardizer: &Standardizer) -> Result<Vec<f64>> {
    if x.len() != standardizer.dim() {
        return Err(Error::InvalidInput(format!(
            "expected {} features, got {}",
            standardizer.dim(),
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite feature value".into()));
    }
    Ok(standardizer.transform(x))
}

/// Numerically stable in-place softmax.
pub(crate) fn softmax(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in logits.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in logits.iter_mut() {
        *v /= sum;
    }
}
