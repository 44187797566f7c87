//! Synthetic combination gestures by feature averaging, plus the subset
//! strategies that control how much synthetic data enters training.
//!
//! A synthetic double is the elementwise mean of one direction-only and one
//! modifier-only feature vector, labeled with the component pair. Subsets
//! can be taken from the single-gesture inputs before pairing or from the
//! generated pairs afterwards, each with three selection modes.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::dataset::{LabeledExample, Provenance};
use crate::error::{Error, Result};
use crate::labels::{enumerate_double_classes, GestureLabel, LabelKind};
use crate::seeds::{derive_seed, rng_from_seed};
use crate::signal::{FeatureVector, FEATURE_DIM};
use crate::stats::{mean_row, squared_distance, subset_size, Standardizer};

/// When the subset is taken relative to pairing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsetStage {
    /// Subset each single-gesture class first, then build all pairs.
    SubsetInput,
    /// Build all pairs, then subset each combination class.
    SubsetAfter,
}

impl SubsetStage {
    pub const ALL: [SubsetStage; 2] = [SubsetStage::SubsetInput, SubsetStage::SubsetAfter];

    pub fn name(self) -> &'static str {
        match self {
            SubsetStage::SubsetInput => "subset_input",
            SubsetStage::SubsetAfter => "subset_after",
        }
    }
}

/// How items are chosen from a pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsetMode {
    /// Seeded sample without replacement: a representative subset.
    Uniform,
    /// The items closest to the pool mean: a tight subset.
    NearMean,
    /// Items at evenly spaced quantiles of distance to the mean, including
    /// the extremes: a diverse subset.
    SpacedQuantiles,
}

impl SubsetMode {
    pub const ALL: [SubsetMode; 3] = [
        SubsetMode::Uniform,
        SubsetMode::NearMean,
        SubsetMode::SpacedQuantiles,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SubsetMode::Uniform => "uniform",
            SubsetMode::NearMean => "near_mean",
            SubsetMode::SpacedQuantiles => "spaced_quantiles",
        }
    }
}

/// A complete subset strategy: stage, mode, and the fraction kept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsetStrategy {
    pub stage: SubsetStage,
    pub mode: SubsetMode,
    /// Fraction of pairs kept, in (0, 1].
    pub fraction: f64,
}

impl SubsetStrategy {
    pub fn validate(&self) -> Result<()> {
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "subset fraction {} must be in (0, 1]",
                self.fraction
            )));
        }
        Ok(())
    }

    pub fn name(&self) -> String {
        format!("{}_{}", self.stage.name(), self.mode.name())
    }
}

/// Synthetic combination examples plus their source class pairs.
#[derive(Debug, Clone)]
pub struct SyntheticDoubleSet {
    pub examples: Vec<LabeledExample>,
    /// `(direction-only class, modifier-only class)` per example.
    pub source_pairs: Vec<(GestureLabel, GestureLabel)>,
}

impl SyntheticDoubleSet {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

/// Average a direction-only and a modifier-only feature vector.
///
/// The result carries the direction of the first input and the modifier of
/// the second. Inputs of any other kind are a label error.
pub fn blend(z_dir: &LabeledExample, z_mod: &LabeledExample) -> Result<LabeledExample> {
    if z_dir.label.kind() != LabelKind::SingleDirection {
        return Err(Error::LabelKind(format!(
            "blend direction input has label {} ({:?})",
            z_dir.label,
            z_dir.label.kind()
        )));
    }
    if z_mod.label.kind() != LabelKind::SingleModifier {
        return Err(Error::LabelKind(format!(
            "blend modifier input has label {} ({:?})",
            z_mod.label,
            z_mod.label.kind()
        )));
    }
    let mut values = [0.0; FEATURE_DIM];
    for (v, (a, b)) in values
        .iter_mut()
        .zip(z_dir.features.as_slice().iter().zip(z_mod.features.as_slice()))
    {
        *v = (a + b) / 2.0;
    }
    Ok(LabeledExample {
        features: FeatureVector::new(values),
        label: GestureLabel::new(z_dir.label.direction, z_mod.label.modifier),
        provenance: Provenance::SyntheticDouble,
        subject_id: z_dir.subject_id.clone(),
        block_tag: "synthetic".to_string(),
    })
}

fn items_of_class<'a>(
    singles: &'a [LabeledExample],
    label: GestureLabel,
) -> Vec<&'a LabeledExample> {
    singles.iter().filter(|e| e.label == label).collect()
}

/// Cross-product blends for every combination class.
///
/// Every direction-only item of each direction class is paired with every
/// modifier-only item of each modifier class.
pub fn generate_all_pairs(singles: &[LabeledExample]) -> Result<SyntheticDoubleSet> {
    let any_dir = singles
        .iter()
        .any(|e| e.label.kind() == LabelKind::SingleDirection);
    let any_mod = singles
        .iter()
        .any(|e| e.label.kind() == LabelKind::SingleModifier);
    if !any_dir || !any_mod {
        return Err(Error::MissingClass(
            "pairing needs at least one direction-only and one modifier-only example".into(),
        ));
    }

    let mut examples = Vec::new();
    let mut source_pairs = Vec::new();
    for double in enumerate_double_classes() {
        let dir_label = GestureLabel::new(double.direction, crate::labels::Modifier::NoMod);
        let mod_label = GestureLabel::new(crate::labels::Direction::NoDir, double.modifier);
        for d in items_of_class(singles, dir_label) {
            for m in items_of_class(singles, mod_label) {
                examples.push(blend(d, m)?);
                source_pairs.push((dir_label, mod_label));
            }
        }
    }
    Ok(SyntheticDoubleSet {
        examples,
        source_pairs,
    })
}

/// Distances to the pool mean in self-standardized space.
///
/// Standardizing on the pool keeps mixed-unit dimensions from dominating
/// the metric.
fn distances_to_mean(items: &[FeatureVector]) -> Result<Vec<f64>> {
    let rows: Vec<Vec<f64>> = items.iter().map(|f| f.to_vec()).collect();
    let standardizer = Standardizer::fit(&rows)?;
    let z = standardizer.transform_all(&rows);
    let center = mean_row(&z)?;
    Ok(z.iter().map(|row| squared_distance(row, &center)).collect())
}

/// Indices sorted by (distance, index): a deterministic total order.
fn order_by_distance(distances: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..distances.len()).collect();
    order.sort_by(|&a, &b| {
        distances[a]
            .partial_cmp(&distances[b])
            .expect("finite distances")
            .then(a.cmp(&b))
    });
    order
}

/// Select `max(1, round(f * N))` items from a pool.
///
/// Selection happens on standardized features; returned indices are in the
/// pool's original order.
pub fn select_subset(
    items: &[FeatureVector],
    mode: SubsetMode,
    fraction: f64,
    seed: u64,
) -> Result<Vec<usize>> {
    if items.is_empty() {
        return Err(Error::InvalidInput("cannot subset an empty pool".into()));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "fraction {fraction} must be in (0, 1]"
        )));
    }
    let n = items.len();
    let k = subset_size(fraction, n);

    let mut selected: Vec<usize> = match mode {
        SubsetMode::Uniform => {
            let mut rng = rng_from_seed(seed);
            sample(&mut rng, n, k).into_iter().collect()
        }
        SubsetMode::NearMean => {
            let distances = distances_to_mean(items)?;
            order_by_distance(&distances)[..k].to_vec()
        }
        SubsetMode::SpacedQuantiles => {
            let distances = distances_to_mean(items)?;
            let order = order_by_distance(&distances);
            if k == 1 {
                vec![order[0]]
            } else {
                (0..k)
                    .map(|j| {
                        let q = j as f64 / (k - 1) as f64;
                        order[((n - 1) as f64 * q).round() as usize]
                    })
                    .collect()
            }
        }
    };
    selected.sort_unstable();
    selected.dedup();
    Ok(selected)
}

fn pick<'a>(pool: &[&'a LabeledExample], indices: &[usize]) -> Vec<&'a LabeledExample> {
    indices.iter().map(|&i| pool[i]).collect()
}

/// Generate synthetic doubles under a subset strategy.
///
/// `SubsetInput` subsets each single class with fraction `sqrt(f)` so the
/// resulting pair count matches the `SubsetAfter` budget of fraction `f`;
/// `SubsetAfter` builds all pairs and subsets each combination class.
pub fn synthesize(
    singles: &[LabeledExample],
    strategy: &SubsetStrategy,
    seed: u64,
) -> Result<SyntheticDoubleSet> {
    strategy.validate()?;
    match strategy.stage {
        SubsetStage::SubsetAfter => {
            let all = generate_all_pairs(singles)?;
            let mut examples = Vec::new();
            let mut source_pairs = Vec::new();
            for (class_idx, double) in enumerate_double_classes().into_iter().enumerate() {
                let class_items: Vec<usize> = (0..all.examples.len())
                    .filter(|&i| all.examples[i].label == double)
                    .collect();
                if class_items.is_empty() {
                    continue;
                }
                let features: Vec<FeatureVector> = class_items
                    .iter()
                    .map(|&i| all.examples[i].features)
                    .collect();
                let class_seed = derive_seed(seed, &[1, class_idx as u64]);
                for &local in &select_subset(&features, strategy.mode, strategy.fraction, class_seed)? {
                    let global = class_items[local];
                    examples.push(all.examples[global].clone());
                    source_pairs.push(all.source_pairs[global]);
                }
            }
            Ok(SyntheticDoubleSet {
                examples,
                source_pairs,
            })
        }
        SubsetStage::SubsetInput => {
            let per_side = strategy.fraction.sqrt();
            let mut kept: Vec<LabeledExample> = singles
                .iter()
                .filter(|e| {
                    !matches!(
                        e.label.kind(),
                        LabelKind::SingleDirection | LabelKind::SingleModifier
                    )
                })
                .cloned()
                .collect();
            let single_classes: Vec<GestureLabel> = crate::labels::enumerate_classes()
                .into_iter()
                .filter(|l| {
                    matches!(
                        l.kind(),
                        LabelKind::SingleDirection | LabelKind::SingleModifier
                    )
                })
                .collect();
            for (class_idx, label) in single_classes.into_iter().enumerate() {
                let pool = items_of_class(singles, label);
                if pool.is_empty() {
                    continue;
                }
                let features: Vec<FeatureVector> = pool.iter().map(|e| e.features).collect();
                let class_seed = derive_seed(seed, &[2, class_idx as u64]);
                let indices = select_subset(&features, strategy.mode, per_side, class_seed)?;
                kept.extend(pick(&pool, &indices).into_iter().cloned());
            }
            generate_all_pairs(&kept)
        }
    }
}
