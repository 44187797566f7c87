//! Random forest of CART trees with Gini splits and per-split feature
//! subsampling.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use super::{prepare_training_data, validate_input, ProbabilisticClassifier};
use crate::error::{Error, Result};
use crate::seeds::{derive_seed, rng_from_seed};
use crate::stats::Standardizer;

/// Hyperparameters for the forest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub tree_count: usize,
    /// `None` grows trees until leaves are pure or unsplittable.
    pub max_depth: Option<usize>,
    /// Features examined per split; `None` means `floor(sqrt(dim))`.
    pub feature_subsample: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            tree_count: 100,
            max_depth: None,
            feature_subsample: None,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        /// Class frequencies at this leaf, normalized to sum to 1.
        distribution: Vec<f64>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    fn leaf_distribution(&self, x: &[f64]) -> &[f64] {
        match self {
            Node::Leaf { distribution } => distribution,
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if x[*feature] <= *threshold {
                    left.leaf_distribution(x)
                } else {
                    right.leaf_distribution(x)
                }
            }
        }
    }
}

/// Fitted bagged-tree ensemble.
#[derive(Debug, Clone)]
pub struct RandomForestModel {
    standardizer: Standardizer,
    trees: Vec<Node>,
    class_count: usize,
}

fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts
        .iter()
        .map(|&c| {
            let p = c as f64 / t;
            p * p
        })
        .sum::<f64>()
}

struct TreeBuilder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    class_count: usize,
    mtry: usize,
    max_depth: Option<usize>,
    feature_pool: Vec<usize>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl<'a> TreeBuilder<'a> {
    fn leaf(&self, rows: &[usize]) -> Node {
        let mut counts = vec![0usize; self.class_count];
        for &r in rows {
            counts[self.y[r]] += 1;
        }
        let total = rows.len() as f64;
        Node::Leaf {
            distribution: counts.iter().map(|&c| c as f64 / total).collect(),
        }
    }

    /// Best Gini split for one feature, or `None` if the feature is constant
    /// over these rows.
    fn best_split_on(&self, rows: &[usize], feature: usize) -> Option<BestSplit> {
        let mut values: Vec<(f64, usize)> =
            rows.iter().map(|&r| (self.x[r][feature], self.y[r])).collect();
        values.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("validated finite").then(a.1.cmp(&b.1)));

        let n = values.len();
        let mut right_counts = vec![0usize; self.class_count];
        for &(_, label) in &values {
            right_counts[label] += 1;
        }
        let mut left_counts = vec![0usize; self.class_count];
        let mut best: Option<BestSplit> = None;

        for i in 0..n - 1 {
            left_counts[values[i].1] += 1;
            right_counts[values[i].1] -= 1;
            if values[i].0 == values[i + 1].0 {
                continue;
            }
            let nl = i + 1;
            let nr = n - nl;
            let impurity = (nl as f64 * gini(&left_counts, nl)
                + nr as f64 * gini(&right_counts, nr))
                / n as f64;
            if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                best = Some(BestSplit {
                    feature,
                    threshold: (values[i].0 + values[i + 1].0) / 2.0,
                    impurity,
                });
            }
        }
        best
    }

    fn build(&mut self, rows: Vec<usize>, depth: usize, rng: &mut ChaCha12Rng) -> Node {
        let first = self.y[rows[0]];
        let pure = rows.iter().all(|&r| self.y[r] == first);
        let depth_capped = self.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_capped || rows.len() < 2 {
            return self.leaf(&rows);
        }

        // Draw the per-split feature subset; if every drawn feature is
        // constant over these rows, fall back to scanning the rest so a
        // consistent dataset is always fully separated.
        self.feature_pool.shuffle(rng);
        let (drawn, rest) = self.feature_pool.split_at(self.mtry);
        let mut best: Option<BestSplit> = None;
        for &f in drawn {
            if let Some(candidate) = self.best_split_on(&rows, f) {
                if best.as_ref().is_none_or(|b| candidate.impurity < b.impurity) {
                    best = Some(candidate);
                }
            }
        }
        if best.is_none() {
            for &f in rest {
                if let Some(candidate) = self.best_split_on(&rows, f) {
                    if best.as_ref().is_none_or(|b| candidate.impurity < b.impurity) {
                        best = Some(candidate);
                    }
                }
            }
        }

        let Some(split) = best else {
            // Identical rows with mixed labels; nothing can separate them.
            return self.leaf(&rows);
        };

        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&r| self.x[r][split.feature] <= split.threshold);
        let left = self.build(left_rows, depth + 1, rng);
        let right = self.build(right_rows, depth + 1, rng);
        Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }
}

/// Fit a random forest. Trees get seeds derived from `seed`, so the result
/// is independent of any parallel fitting schedule.
pub fn fit_random_forest(
    x: &[Vec<f64>],
    y: &[usize],
    class_count: usize,
    params: &ForestParams,
    seed: u64,
) -> Result<RandomForestModel> {
    if params.tree_count == 0 {
        return Err(Error::InvalidConfig("forest needs at least one tree".into()));
    }
    let data = prepare_training_data(x, y, class_count)?;
    let dim = data.x[0].len();
    let mtry = params
        .feature_subsample
        .unwrap_or_else(|| (dim as f64).sqrt().floor() as usize)
        .clamp(1, dim);

    let n = data.x.len();
    let mut trees = Vec::with_capacity(params.tree_count);
    for t in 0..params.tree_count {
        let mut rng = rng_from_seed(derive_seed(seed, &[0x7265e5, t as u64]));
        let rows: Vec<usize> = if params.bootstrap {
            (0..n).map(|_| rng.random_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        let mut builder = TreeBuilder {
            x: &data.x,
            y: &data.y,
            class_count,
            mtry,
            max_depth: params.max_depth,
            feature_pool: (0..dim).collect(),
        };
        trees.push(builder.build(rows, 0, &mut rng));
    }

    Ok(RandomForestModel {
        standardizer: data.standardizer,
        trees,
        class_count,
    })
}

impl ProbabilisticClassifier for RandomForestModel {
    fn class_count(&self) -> usize {
        self.class_count
    }

    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        let z = validate_input(x, &self.standardizer)?;
        let mut proba = vec![0.0; self.class_count];
        for tree in &self.trees {
            for (p, &d) in proba.iter_mut().zip(tree.leaf_distribution(&z)) {
                *p += d;
            }
        }
        let t = self.trees.len() as f64;
        for p in &mut proba {
            *p /= t;
        }
        Ok(proba)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::test_support::{training_accuracy, two_blobs};
    use crate::seeds::rng_from_seed;
    use rand::Rng;

    #[test]
    fn single_tree_memorizes_consistent_data() {
        let mut rng = rng_from_seed(21);
        let x: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..3).map(|_| rng.random::<f64>()).collect())
            .collect();
        let y: Vec<usize> = x.iter().map(|r| usize::from(r[1] > 0.5)).collect();
        let params = ForestParams {
            tree_count: 1,
            bootstrap: false,
            feature_subsample: Some(3),
            max_depth: None,
        };
        let model = fit_random_forest(&x, &y, 2, &params, 0).unwrap();
        assert_eq!(training_accuracy(&model, &x, &y), 1.0);
    }

    #[test]
    fn memorizes_even_with_small_feature_subsample() {
        let mut rng = rng_from_seed(22);
        let x: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..6).map(|_| rng.random::<f64>()).collect())
            .collect();
        let y: Vec<usize> = x.iter().map(|r| usize::from(r[4] > 0.5)).collect();
        let params = ForestParams {
            tree_count: 1,
            bootstrap: false,
            feature_subsample: Some(1),
            max_depth: None,
        };
        let model = fit_random_forest(&x, &y, 2, &params, 3).unwrap();
        assert_eq!(training_accuracy(&model, &x, &y), 1.0);
    }

    #[test]
    fn identical_labels_rejected() {
        let x = vec![vec![0.0], vec![1.0]];
        let y = vec![1, 1];
        assert!(matches!(
            fit_random_forest(&x, &y, 2, &ForestParams::default(), 0),
            Err(Error::DegenerateFit(_))
        ));
    }

    #[test]
    fn probabilities_sum_to_one() {
        let mut rng = rng_from_seed(8);
        let (x, y) = two_blobs(&mut rng, 15, 5, 2.0);
        let model = fit_random_forest(&x, &y, 2, &ForestParams::default(), 1).unwrap();
        for _ in 0..100 {
            let q: Vec<f64> = (0..5).map(|_| rng.random::<f64>() * 4.0 - 1.0).collect();
            let p = model.predict_proba(&q).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(p.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn seeded_fits_are_identical() {
        let mut rng = rng_from_seed(17);
        let (x, y) = two_blobs(&mut rng, 12, 4, 1.5);
        let params = ForestParams {
            tree_count: 10,
            ..ForestParams::default()
        };
        let a = fit_random_forest(&x, &y, 2, &params, 5).unwrap();
        let b = fit_random_forest(&x, &y, 2, &params, 5).unwrap();
        for _ in 0..30 {
            let q: Vec<f64> = (0..4).map(|_| rng.random::<f64>() * 3.0).collect();
            assert_eq!(a.predict_proba(&q).unwrap(), b.predict_proba(&q).unwrap());
        }
    }

    #[test]
    fn depth_one_stump_is_imperfect_on_xor() {
        // A depth-limited tree cannot represent xor, so the cap is honored.
        let x = vec![
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
        ];
        let y = vec![0, 0, 1, 1];
        let params = ForestParams {
            tree_count: 1,
            bootstrap: false,
            feature_subsample: Some(2),
            max_depth: Some(1),
        };
        let model = fit_random_forest(&x, &y, 2, &params, 0).unwrap();
        assert!(training_accuracy(&model, &x, &y) < 1.0);
    }
}
