//! Balanced-accuracy metrics and the lower / augmented / upper evaluation
//! conditions.
//!
//! Every condition trains on some variant of one subject's Calibration data
//! and is scored on the same held-out test blocks. A prediction is correct
//! only when both label components match; accuracies are means of per-class
//! accuracies, reported separately for the 7 single/rest classes, the 8
//! combination classes, and overall.

pub mod experiments;

pub use experiments::{
    results_to_csv, run_experiment_1, run_experiment_2, run_experiment_3, ExperimentGrid,
    ResultRow,
};

use serde::{Deserialize, Serialize};

use crate::architectures::{train_model, ArchitectureKind};
use crate::augmentation::{augment_examples, AugmentMethod};
use crate::classifiers::{Algorithm, ClassifierParams};
use crate::dataset::{LabeledExample, SplitSpec};
use crate::error::{Error, Result};
use crate::labels::{enumerate_classes, GestureLabel, LabelKind, CLASS_COUNT};
use crate::seeds::derive_seed;
use crate::synthesis::{generate_all_pairs, synthesize, SubsetStrategy};

/// The 7 classes with real calibration data (singles and rest).
pub fn single_and_rest_classes() -> Vec<GestureLabel> {
    enumerate_classes()
        .into_iter()
        .filter(|l| !l.is_double())
        .collect()
}

/// The 8 combination classes.
pub fn double_classes() -> Vec<GestureLabel> {
    enumerate_classes()
        .into_iter()
        .filter(|l| l.is_double())
        .collect()
}

/// Mean per-class accuracy over `classes`.
///
/// A prediction counts only if both components match the truth. Every
/// filtered class must appear in `truths`.
pub fn balanced_accuracy(
    predictions: &[GestureLabel],
    truths: &[GestureLabel],
    classes: &[GestureLabel],
) -> Result<f64> {
    if predictions.len() != truths.len() {
        return Err(Error::InvalidInput(format!(
            "{} predictions vs {} truths",
            predictions.len(),
            truths.len()
        )));
    }
    if classes.is_empty() {
        return Err(Error::InvalidInput("empty class filter".into()));
    }
    let mut total = 0.0;
    for class in classes {
        let mut seen = 0usize;
        let mut correct = 0usize;
        for (p, t) in predictions.iter().zip(truths) {
            if t == class {
                seen += 1;
                if p == t {
                    correct += 1;
                }
            }
        }
        if seen == 0 {
            return Err(Error::MissingClass(format!(
                "class {class} has no examples in the truth set"
            )));
        }
        total += correct as f64 / seen as f64;
    }
    Ok(total / classes.len() as f64)
}

/// Per-subject evaluation result for one condition.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    /// Balanced accuracy over the 7 single/rest classes.
    pub singles_acc: f64,
    /// Balanced accuracy over the 8 combination classes.
    pub doubles_acc: f64,
    /// Balanced accuracy over all 15 classes.
    pub overall_acc: f64,
    /// Per-class accuracy in canonical class order.
    pub per_class: Vec<f64>,
    /// Confusion counts, `confusion[truth][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub condition: String,
    pub subject_id: String,
    pub seed: u64,
}

/// How synthetic combination data enters the augmented condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SynthesisSpec {
    /// Every valid pair of calibration singles.
    AllPairs,
    /// A subset strategy applied around pairing.
    Subset(SubsetStrategy),
}

impl SynthesisSpec {
    pub fn strategy_name(&self) -> String {
        match self {
            SynthesisSpec::AllPairs => "all_pairs".to_string(),
            SynthesisSpec::Subset(strategy) => strategy.name(),
        }
    }

    pub fn fraction(&self) -> Option<f64> {
        match self {
            SynthesisSpec::AllPairs => None,
            SynthesisSpec::Subset(strategy) => Some(strategy.fraction),
        }
    }
}

/// Optional single-gesture augmentation on top of synthesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentSpec {
    pub method: AugmentMethod,
    /// Augmented count as a fraction of the synthetic-doubles count,
    /// divided evenly across the 7 single/rest classes.
    pub fraction: f64,
}

/// Training-set condition for one evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Condition {
    /// Calibration singles only.
    Lower,
    /// Calibration singles plus real data from the special blocks.
    Upper,
    /// Calibration singles plus synthetic doubles (and optional augmented
    /// singles).
    Augmented {
        synthesis: SynthesisSpec,
        augment: Option<AugmentSpec>,
    },
}

impl Condition {
    pub fn name(&self) -> &'static str {
        match self {
            Condition::Lower => "lower",
            Condition::Upper => "upper",
            Condition::Augmented { .. } => "augmented",
        }
    }
}

/// Assemble the training set for a condition from one subject's split.
pub fn build_training_set(
    split: &SplitSpec,
    condition: &Condition,
    seed: u64,
) -> Result<Vec<LabeledExample>> {
    let mut train = split.train.clone();
    match condition {
        Condition::Lower => {}
        Condition::Upper => train.extend(split.special.iter().cloned()),
        Condition::Augmented { synthesis, augment } => {
            let synthetic = match synthesis {
                SynthesisSpec::AllPairs => generate_all_pairs(&split.train)?,
                SynthesisSpec::Subset(strategy) => {
                    synthesize(&split.train, strategy, derive_seed(seed, &[0x51]))?
                }
            };
            let synth_count = synthetic.len();
            train.extend(synthetic.examples);

            if let Some(spec) = augment {
                let singles = single_and_rest_classes();
                let per_class = (spec.fraction * synth_count as f64 / singles.len() as f64)
                    .round() as usize;
                if per_class > 0 {
                    for (class_idx, label) in singles.iter().enumerate() {
                        let class_items: Vec<LabeledExample> = split
                            .train
                            .iter()
                            .filter(|e| e.label == *label)
                            .cloned()
                            .collect();
                        let class_seed = derive_seed(seed, &[0xa6, class_idx as u64]);
                        train.extend(augment_examples(
                            &class_items,
                            &spec.method,
                            per_class,
                            class_seed,
                        )?);
                    }
                }
            }
        }
    }
    Ok(train)
}

/// Train under a condition and evaluate on the subject's test blocks.
pub fn run_condition(
    split: &SplitSpec,
    condition: &Condition,
    arch: ArchitectureKind,
    algo: Algorithm,
    params: &ClassifierParams,
    seed: u64,
) -> Result<EvalReport> {
    let train = build_training_set(split, condition, seed)?;
    let model = train_model(arch, &train, algo, params, derive_seed(seed, &[0x7a]))?;

    let mut predictions = Vec::with_capacity(split.test.len());
    let mut truths = Vec::with_capacity(split.test.len());
    let mut confusion = vec![vec![0usize; CLASS_COUNT]; CLASS_COUNT];
    for example in &split.test {
        let prediction = model.predict(example.features.as_slice())?;
        confusion[example.label.class_index()][prediction.label.class_index()] += 1;
        predictions.push(prediction.label);
        truths.push(example.label);
    }

    let classes = enumerate_classes();
    let mut per_class = Vec::with_capacity(CLASS_COUNT);
    for class in &classes {
        per_class.push(balanced_accuracy(&predictions, &truths, &[*class])?);
    }
    let singles_acc = balanced_accuracy(&predictions, &truths, &single_and_rest_classes())?;
    let doubles_acc = balanced_accuracy(&predictions, &truths, &double_classes())?;
    let overall_acc = balanced_accuracy(&predictions, &truths, &classes)?;

    let subject_id = split
        .test
        .first()
        .map(|e| e.subject_id.clone())
        .unwrap_or_default();
    Ok(EvalReport {
        singles_acc,
        doubles_acc,
        overall_acc,
        per_class,
        confusion,
        condition: condition.name().to_string(),
        subject_id,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::{Direction, Modifier};
    use crate::seeds::rng_from_seed;
    use rand::Rng;

    fn label(i: usize) -> GestureLabel {
        GestureLabel::from_class_index(i).unwrap()
    }

    #[test]
    fn all_correct_is_one() {
        let truths: Vec<GestureLabel> = (0..15).map(label).collect();
        let acc = balanced_accuracy(&truths, &truths, &enumerate_classes()).unwrap();
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn biased_predictor_on_two_classes() {
        let a = label(0);
        let b = label(1);
        let truths = vec![a, a, a, b, b, b];
        let predictions = vec![a; 6];
        let acc = balanced_accuracy(&predictions, &truths, &[a, b]).unwrap();
        assert!((acc - 0.5).abs() < 1e-12);
    }

    #[test]
    fn missing_class_is_an_error() {
        let truths = vec![label(0); 4];
        let predictions = vec![label(0); 4];
        assert!(matches!(
            balanced_accuracy(&predictions, &truths, &[label(0), label(1)]),
            Err(Error::MissingClass(_))
        ));
        assert!(balanced_accuracy(&predictions, &truths[..3], &[label(0)]).is_err());
    }

    #[test]
    fn matches_brute_force_on_random_instances() {
        let mut rng = rng_from_seed(77);
        let classes = enumerate_classes();
        for _ in 0..100 {
            let n = rng.random_range(30..120);
            let truths: Vec<GestureLabel> =
                (0..n).map(|_| label(rng.random_range(0..15))).collect();
            let predictions: Vec<GestureLabel> =
                (0..n).map(|_| label(rng.random_range(0..15))).collect();
            let present: Vec<GestureLabel> = classes
                .iter()
                .copied()
                .filter(|c| truths.contains(c))
                .collect();
            if present.is_empty() {
                continue;
            }
            let fast = balanced_accuracy(&predictions, &truths, &present).unwrap();

            // Brute force: one pass per class, by definition.
            let mut sum = 0.0;
            for class in &present {
                let idx: Vec<usize> = (0..n).filter(|&i| truths[i] == *class).collect();
                let correct = idx.iter().filter(|&&i| predictions[i] == *class).count();
                sum += correct as f64 / idx.len() as f64;
            }
            let slow = sum / present.len() as f64;
            assert!((fast - slow).abs() < 1e-12);
        }
    }

    #[test]
    fn chance_level_for_uniform_predictions() {
        let mut rng = rng_from_seed(5);
        let n = 100_000;
        let truths: Vec<GestureLabel> = (0..n).map(|i| label(i % 15)).collect();
        let predictions: Vec<GestureLabel> =
            (0..n).map(|_| label(rng.random_range(0..15))).collect();
        let acc = balanced_accuracy(&predictions, &truths, &enumerate_classes()).unwrap();
        assert!((acc - 1.0 / 15.0).abs() < 0.01, "got {acc}");
    }

    #[test]
    fn class_filters_partition_the_vocabulary() {
        let singles = single_and_rest_classes();
        let doubles = double_classes();
        assert_eq!(singles.len(), 7);
        assert_eq!(doubles.len(), 8);
        assert!(singles.iter().all(|l| !doubles.contains(l)));
        assert!(singles.contains(&GestureLabel::REST));
        assert!(singles.contains(&GestureLabel::new(Direction::Up, Modifier::NoMod)));
    }
}
