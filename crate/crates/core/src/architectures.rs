//! Parallel and hierarchical multi-label model compositions.
//!
//! Both map one feature vector to a posterior over the 5 directions and a
//! posterior over the 3 modifiers. By construction every prediction is one
//! of the 15 valid classes; mutually exclusive gestures cannot co-occur.

use serde::{Deserialize, Serialize};

use crate::classifiers::{
    argmax, Algorithm, ClassifierParams, ProbabilisticClassifier, TrainedClassifier,
};
use crate::dataset::LabeledExample;
use crate::error::{Error, Result};
use crate::labels::{Direction, GestureLabel, Modifier};
use crate::seeds::derive_seed;

/// Which composition of classifier heads to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchitectureKind {
    Parallel,
    Hierarchical,
}

impl ArchitectureKind {
    pub const ALL: [ArchitectureKind; 2] =
        [ArchitectureKind::Parallel, ArchitectureKind::Hierarchical];

    pub fn name(self) -> &'static str {
        match self {
            ArchitectureKind::Parallel => "parallel",
            ArchitectureKind::Hierarchical => "hierarchical",
        }
    }
}

/// Two independent heads: a 5-way direction classifier and a 3-way modifier
/// classifier, each trained on its component of the joint labels.
#[derive(Debug)]
pub struct ParallelModel {
    dir_head: TrainedClassifier,
    mod_head: TrainedClassifier,
}

/// Detect-then-classify per component: binary presence heads gate 4-way
/// direction and 2-way modifier heads trained only on present rows.
#[derive(Debug)]
pub struct HierarchicalModel {
    dir_detect: TrainedClassifier,
    dir_classify: TrainedClassifier,
    mod_detect: TrainedClassifier,
    mod_classify: TrainedClassifier,
}

/// A fitted multi-label model of either architecture.
#[derive(Debug)]
pub enum MultiLabelModel {
    Parallel(ParallelModel),
    Hierarchical(HierarchicalModel),
}

/// Posteriors over both components plus the joint argmax label.
#[derive(Debug, Clone)]
pub struct Prediction {
    /// Simplex over the 5 directions in canonical order.
    pub dir_posterior: Vec<f64>,
    /// Simplex over the 3 modifiers in canonical order.
    pub mod_posterior: Vec<f64>,
    pub label: GestureLabel,
}

fn check_coverage(train: &[LabeledExample]) -> Result<()> {
    if train.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    let mut missing = Vec::new();
    for direction in Direction::ALL {
        if !train.iter().any(|e| e.label.direction == direction) {
            missing.push(format!("direction {}", direction.name()));
        }
    }
    for modifier in Modifier::ALL {
        if !train.iter().any(|e| e.label.modifier == modifier) {
            missing.push(format!("modifier {}", modifier.name()));
        }
    }
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::MissingClass(missing.join(", ")))
    }
}

fn feature_rows(train: &[LabeledExample]) -> Vec<Vec<f64>> {
    train.iter().map(|e| e.features.to_vec()).collect()
}

/// Train the parallel architecture.
///
/// The direction head sees the direction component of every row (modifier-only
/// and rest rows become `NoDir`); the modifier head is symmetric. All heads
/// use the same classifier algorithm.
pub fn train_parallel(
    train: &[LabeledExample],
    algorithm: Algorithm,
    params: &ClassifierParams,
    seed: u64,
) -> Result<ParallelModel> {
    check_coverage(train)?;
    let x = feature_rows(train);
    let dir_labels: Vec<usize> = train.iter().map(|e| e.label.direction.index()).collect();
    let mod_labels: Vec<usize> = train.iter().map(|e| e.label.modifier.index()).collect();

    let dir_head = TrainedClassifier::fit(
        algorithm,
        &x,
        &dir_labels,
        Direction::ALL.len(),
        params,
        derive_seed(seed, &[1]),
    )?;
    let mod_head = TrainedClassifier::fit(
        algorithm,
        &x,
        &mod_labels,
        Modifier::ALL.len(),
        params,
        derive_seed(seed, &[2]),
    )?;
    Ok(ParallelModel { dir_head, mod_head })
}

/// Train the hierarchical architecture.
///
/// Detect heads fit presence bits over all rows (class 1 = present); classify
/// heads fit only on rows where the component is present.
pub fn train_hierarchical(
    train: &[LabeledExample],
    algorithm: Algorithm,
    params: &ClassifierParams,
    seed: u64,
) -> Result<HierarchicalModel> {
    check_coverage(train)?;
    let x = feature_rows(train);

    let dir_present: Vec<usize> = train
        .iter()
        .map(|e| usize::from(e.label.direction.is_active()))
        .collect();
    let mod_present: Vec<usize> = train
        .iter()
        .map(|e| usize::from(e.label.modifier.is_active()))
        .collect();

    let dir_rows: Vec<Vec<f64>> = train
        .iter()
        .filter(|e| e.label.direction.is_active())
        .map(|e| e.features.to_vec())
        .collect();
    let dir_classes: Vec<usize> = train
        .iter()
        .filter(|e| e.label.direction.is_active())
        .map(|e| e.label.direction.index())
        .collect();
    let mod_rows: Vec<Vec<f64>> = train
        .iter()
        .filter(|e| e.label.modifier.is_active())
        .map(|e| e.features.to_vec())
        .collect();
    let mod_classes: Vec<usize> = train
        .iter()
        .filter(|e| e.label.modifier.is_active())
        .map(|e| e.label.modifier.index())
        .collect();

    let dir_detect = TrainedClassifier::fit(
        algorithm,
        &x,
        &dir_present,
        2,
        params,
        derive_seed(seed, &[1]),
    )?;
    let dir_classify = TrainedClassifier::fit(
        algorithm,
        &dir_rows,
        &dir_classes,
        Direction::ACTIVE.len(),
        params,
        derive_seed(seed, &[2]),
    )?;
    let mod_detect = TrainedClassifier::fit(
        algorithm,
        &x,
        &mod_present,
        2,
        params,
        derive_seed(seed, &[3]),
    )?;
    let mod_classify = TrainedClassifier::fit(
        algorithm,
        &mod_rows,
        &mod_classes,
        Modifier::ACTIVE.len(),
        params,
        derive_seed(seed, &[4]),
    )?;

    Ok(HierarchicalModel {
        dir_detect,
        dir_classify,
        mod_detect,
        mod_classify,
    })
}

/// Train either architecture with one entry point.
pub fn train_model(
    kind: ArchitectureKind,
    train: &[LabeledExample],
    algorithm: Algorithm,
    params: &ClassifierParams,
    seed: u64,
) -> Result<MultiLabelModel> {
    match kind {
        ArchitectureKind::Parallel => {
            train_parallel(train, algorithm, params, seed).map(MultiLabelModel::Parallel)
        }
        ArchitectureKind::Hierarchical => {
            train_hierarchical(train, algorithm, params, seed).map(MultiLabelModel::Hierarchical)
        }
    }
}

fn label_from_posteriors(dir_posterior: &[f64], mod_posterior: &[f64]) -> GestureLabel {
    GestureLabel::new(
        Direction::ALL[argmax(dir_posterior)],
        Modifier::ALL[argmax(mod_posterior)],
    )
}

impl ParallelModel {
    pub fn predict(&self, features: &[f64]) -> Result<Prediction> {
        let dir_posterior = self.dir_head.predict_proba(features)?;
        let mod_posterior = self.mod_head.predict_proba(features)?;
        let label = label_from_posteriors(&dir_posterior, &mod_posterior);
        Ok(Prediction {
            dir_posterior,
            mod_posterior,
            label,
        })
    }

    pub fn dir_head(&self) -> &TrainedClassifier {
        &self.dir_head
    }

    pub fn mod_head(&self) -> &TrainedClassifier {
        &self.mod_head
    }
}

/// Compose a presence probability with conditional class probabilities into
/// a posterior in canonical order (active classes first, absent last).
fn compose(p_present: f64, conditional: &[f64]) -> Vec<f64> {
    let mut posterior = Vec::with_capacity(conditional.len() + 1);
    for &c in conditional {
        posterior.push(p_present * c);
    }
    posterior.push(1.0 - p_present);
    posterior
}

impl HierarchicalModel {
    pub fn predict(&self, features: &[f64]) -> Result<Prediction> {
        let p_dir = self.dir_detect.predict_proba(features)?[1];
        let dir_conditional = self.dir_classify.predict_proba(features)?;
        let p_mod = self.mod_detect.predict_proba(features)?[1];
        let mod_conditional = self.mod_classify.predict_proba(features)?;

        let dir_posterior = compose(p_dir, &dir_conditional);
        let mod_posterior = compose(p_mod, &mod_conditional);
        let label = label_from_posteriors(&dir_posterior, &mod_posterior);
        Ok(Prediction {
            dir_posterior,
            mod_posterior,
            label,
        })
    }
}

impl MultiLabelModel {
    pub fn predict(&self, features: &[f64]) -> Result<Prediction> {
        match self {
            MultiLabelModel::Parallel(m) => m.predict(features),
            MultiLabelModel::Hierarchical(m) => m.predict(features),
        }
    }
}
