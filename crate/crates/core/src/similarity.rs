//! RBF-kernel class-similarity heatmaps over the 15 real classes and the 8
//! synthetic combination classes, with the median heuristic setting the
//! kernel length scale per subject.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::split_session;
use crate::error::{Error, Result};
use crate::labels::{enumerate_classes, enumerate_double_classes, GestureLabel};
use crate::seeds::derive_seed;
use crate::signal::FeatureVector;
use crate::simgen::Session;
use crate::stats::{median, squared_distance};
use crate::synthesis::{generate_all_pairs, select_subset, SubsetMode};

/// Number of heatmap classes: 15 real plus 8 synthetic combinations.
pub const HEATMAP_CLASSES: usize = 23;

/// Class-pair similarity matrix for one subject (or a cross-subject mean).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityHeatmap {
    /// Row-major `23 x 23`, symmetric, entries in [0, 1].
    pub matrix: Vec<Vec<f64>>,
    /// Axis labels: the 15 real classes then the 8 synthetic combinations.
    pub class_names: Vec<String>,
    /// Kernel scale used; the mean scale for an averaged heatmap.
    pub gamma: f64,
    /// Subject the map describes, or "averaged".
    pub subject_id: String,
    pub seed: u64,
}

/// Axis labels in canonical order; synthetic classes carry a prefix.
pub fn heatmap_class_names() -> Vec<String> {
    let mut names: Vec<String> = enumerate_classes().iter().map(|l| l.to_string()).collect();
    names.extend(
        enumerate_double_classes()
            .iter()
            .map(|l| format!("synthetic:{l}")),
    );
    names
}

/// Median-heuristic kernel scale: `1 / median(squared distances)` over all
/// unordered distinct pairs. Self-pairs are excluded; they are identically
/// zero and would bias the scale low.
pub fn median_heuristic(features: &[FeatureVector]) -> Result<f64> {
    if features.len() < 2 {
        return Err(Error::InvalidInput(
            "median heuristic needs at least two items".into(),
        ));
    }
    let mut distances = Vec::with_capacity(features.len() * (features.len() - 1) / 2);
    for i in 0..features.len() {
        for j in i + 1..features.len() {
            distances.push(squared_distance(
                features[i].as_slice(),
                features[j].as_slice(),
            ));
        }
    }
    let h = median(&distances)?;
    if h <= 0.0 {
        return Err(Error::DegenerateStatistic(
            "all items identical; median squared distance is zero".into(),
        ));
    }
    Ok(1.0 / h)
}

/// RBF kernel `exp(-gamma * ||z1 - z2||^2)`, in (0, 1].
pub fn rbf_kernel(z1: &[f64], z2: &[f64], gamma: f64) -> Result<f64> {
    if z1.len() != z2.len() {
        return Err(Error::InvalidInput(format!(
            "length mismatch: {} vs {}",
            z1.len(),
            z2.len()
        )));
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidInput(format!("gamma {gamma} must be positive")));
    }
    Ok((-gamma * squared_distance(z1, z2)).exp())
}

/// Mean RBF similarity over all ordered item pairs of two classes
/// (including self-pairs when the classes coincide).
pub fn class_similarity(c1: &[FeatureVector], c2: &[FeatureVector], gamma: f64) -> Result<f64> {
    if c1.is_empty() || c2.is_empty() {
        return Err(Error::InvalidInput("empty class in similarity".into()));
    }
    let mut total = 0.0;
    for a in c1 {
        for b in c2 {
            total += rbf_kernel(a.as_slice(), b.as_slice(), gamma)?;
        }
    }
    Ok(total / (c1.len() * c2.len()) as f64)
}

/// Build one subject's 23x23 heatmap.
///
/// Items: every real window in the session plus a per-class uniform subset
/// (fraction `synth_fraction`, floored at one item) of all possible
/// synthetic combinations built from the Calibration singles. The kernel
/// scale comes from the median heuristic over exactly these items.
pub fn build_heatmap(
    session: &Session,
    synth_fraction: f64,
    seed: u64,
) -> Result<SimilarityHeatmap> {
    if !(synth_fraction > 0.0 && synth_fraction <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "synthetic fraction {synth_fraction} must be in (0, 1]"
        )));
    }
    let split = split_session(session)?;

    let real_classes = enumerate_classes();
    let mut class_items: Vec<Vec<FeatureVector>> = vec![Vec::new(); HEATMAP_CLASSES];
    for example in split
        .train
        .iter()
        .chain(split.special.iter())
        .chain(split.test.iter())
    {
        class_items[example.label.class_index()].push(example.features);
    }
    for (i, label) in real_classes.iter().enumerate() {
        if class_items[i].is_empty() {
            return Err(Error::MissingClass(format!(
                "session has no examples of class {label}"
            )));
        }
    }

    let synthetic = generate_all_pairs(&split.train)?;
    for (class_offset, double) in enumerate_double_classes().into_iter().enumerate() {
        let pool: Vec<FeatureVector> = synthetic
            .examples
            .iter()
            .filter(|e| e.label == double)
            .map(|e| e.features)
            .collect();
        if pool.is_empty() {
            return Err(Error::MissingClass(format!(
                "no synthetic items for class {double}"
            )));
        }
        let class_seed = derive_seed(seed, &[0x4ea7, class_offset as u64]);
        let indices = select_subset(&pool, SubsetMode::Uniform, synth_fraction, class_seed)?;
        class_items[15 + class_offset] = indices.into_iter().map(|i| pool[i]).collect();
    }

    let all_items: Vec<FeatureVector> = class_items.iter().flatten().copied().collect();
    let gamma = median_heuristic(&all_items)?;

    let mut matrix = vec![vec![0.0; HEATMAP_CLASSES]; HEATMAP_CLASSES];
    for i in 0..HEATMAP_CLASSES {
        for j in i..HEATMAP_CLASSES {
            let s = class_similarity(&class_items[i], &class_items[j], gamma)?;
            matrix[i][j] = s;
            matrix[j][i] = s;
        }
    }

    Ok(SimilarityHeatmap {
        matrix,
        class_names: heatmap_class_names(),
        gamma,
        subject_id: session.subject_id.clone(),
        seed,
    })
}

/// Elementwise mean of per-subject heatmaps; gamma averages too.
pub fn average_heatmaps(heatmaps: &[SimilarityHeatmap]) -> Result<SimilarityHeatmap> {
    let Some(first) = heatmaps.first() else {
        return Err(Error::InvalidInput("no heatmaps to average".into()));
    };
    let n = heatmaps.len() as f64;
    let mut matrix = vec![vec![0.0; HEATMAP_CLASSES]; HEATMAP_CLASSES];
    for map in heatmaps {
        if map.class_names != first.class_names {
            return Err(Error::InvalidInput("heatmap class axes differ".into()));
        }
        for (out_row, row) in matrix.iter_mut().zip(&map.matrix) {
            for (out, &v) in out_row.iter_mut().zip(row) {
                *out += v;
            }
        }
    }
    for row in &mut matrix {
        for v in row.iter_mut() {
            *v /= n;
        }
    }
    Ok(SimilarityHeatmap {
        matrix,
        class_names: first.class_names.clone(),
        gamma: heatmaps.iter().map(|h| h.gamma).sum::<f64>() / n,
        subject_id: "averaged".to_string(),
        seed: first.seed,
    })
}

impl SimilarityHeatmap {
    /// Write the matrix as CSV (header row of class names) plus a JSON
    /// sidecar with gamma, subject, and seed.
    pub fn export(&self, csv_path: &Path, sidecar_path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record(&self.class_names)
            .map_err(|e| Error::Corrupt(format!("csv write: {e}")))?;
        for row in &self.matrix {
            let record: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writer
                .write_record(&record)
                .map_err(|e| Error::Corrupt(format!("csv write: {e}")))?;
        }
        let buf = writer
            .into_inner()
            .map_err(|e| Error::Corrupt(format!("csv flush: {e}")))?;
        let mut file = std::fs::File::create(csv_path)?;
        file.write_all(&buf)?;

        #[derive(Serialize)]
        struct Sidecar<'a> {
            gamma: f64,
            subject_id: &'a str,
            seed: u64,
        }
        let sidecar = serde_json::to_string_pretty(&Sidecar {
            gamma: self.gamma,
            subject_id: &self.subject_id,
            seed: self.seed,
        })
        .map_err(|e| Error::Corrupt(e.to_string()))?;
        std::fs::write(sidecar_path, sidecar + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::FEATURE_DIM;
    use crate::simgen::{generate_session, SimulatorConfig};

    fn fv(head: &[f64]) -> FeatureVector {
        let mut values = [0.0; FEATURE_DIM];
        values[..head.len()].copy_from_slice(head);
        FeatureVector::new(values)
    }

    #[test]
    fn median_heuristic_examples() {
        // Two points at distance 3 -> gamma = 1/9.
        let two = vec![fv(&[0.0]), fv(&[3.0])];
        assert!((median_heuristic(&two).unwrap() - 1.0 / 9.0).abs() < 1e-12);

        // Collinear points at 0, 1, 3: squared distances {1, 4, 9}, H = 4.
        let three = vec![fv(&[0.0]), fv(&[1.0]), fv(&[3.0])];
        assert!((median_heuristic(&three).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn median_heuristic_scales_inversely_with_square() {
        let items = vec![fv(&[0.0, 1.0]), fv(&[2.0, 0.5]), fv(&[4.0, 3.0])];
        let gamma = median_heuristic(&items).unwrap();
        let scaled: Vec<FeatureVector> = items
            .iter()
            .map(|f| {
                let mut v = f.values;
                for x in v.iter_mut() {
                    *x *= 5.0;
                }
                FeatureVector::new(v)
            })
            .collect();
        let gamma_scaled = median_heuristic(&scaled).unwrap();
        assert!((gamma_scaled - gamma / 25.0).abs() < 1e-12 * gamma);
    }

    #[test]
    fn median_heuristic_degenerate_cases() {
        assert!(median_heuristic(&[fv(&[1.0])]).is_err());
        let identical = vec![fv(&[2.0]); 4];
        assert!(matches!(
            median_heuristic(&identical),
            Err(Error::DegenerateStatistic(_))
        ));
    }

    #[test]
    fn rbf_kernel_known_values() {
        let a = [1.0, 2.0];
        assert_eq!(rbf_kernel(&a, &a, 0.5).unwrap(), 1.0);
        let b = [1.0 + (2f64.ln()).sqrt(), 2.0];
        assert!((rbf_kernel(&a, &b, 1.0).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(
            rbf_kernel(&a, &b, 2.2).unwrap(),
            rbf_kernel(&b, &a, 2.2).unwrap()
        );
        assert!(rbf_kernel(&a, &[1.0], 1.0).is_err());
        assert!(rbf_kernel(&a, &a, 0.0).is_err());
    }

    #[test]
    fn class_similarity_small_cases() {
        let a = fv(&[0.0]);
        let b = fv(&[1.0]);
        let c = fv(&[2.0]);
        let gamma = 0.7;
        assert_eq!(class_similarity(&[a], &[a], gamma).unwrap(), 1.0);
        assert_eq!(
            class_similarity(&[a], &[b], gamma).unwrap(),
            rbf_kernel(a.as_slice(), b.as_slice(), gamma).unwrap()
        );
        let expected = (rbf_kernel(a.as_slice(), b.as_slice(), gamma).unwrap()
            + rbf_kernel(a.as_slice(), c.as_slice(), gamma).unwrap())
            / 2.0;
        assert!((class_similarity(&[a], &[b, c], gamma).unwrap() - expected).abs() < 1e-15);
        assert!(class_similarity(&[], &[a], gamma).is_err());
    }

    #[test]
    fn heatmap_shape_symmetry_and_bounds() {
        let session = generate_session(&SimulatorConfig::default(), "S01").unwrap();
        let map = build_heatmap(&session, 0.005, 3).unwrap();
        assert_eq!(map.matrix.len(), 23);
        assert_eq!(map.class_names.len(), 23);
        for i in 0..23 {
            assert_eq!(map.matrix[i].len(), 23);
            for j in 0..23 {
                let v = map.matrix[i][j];
                assert!((0.0..=1.0).contains(&v));
                assert!((v - map.matrix[j][i]).abs() < 1e-12);
            }
        }
        // Classes are tighter within themselves than across on default data.
        for i in 0..23 {
            let row_mean: f64 = map.matrix[i].iter().sum::<f64>() / 23.0;
            assert!(
                map.matrix[i][i] >= row_mean,
                "diagonal {i}: {} < row mean {row_mean}",
                map.matrix[i][i]
            );
        }
    }

    #[test]
    fn heatmap_is_scale_invariant_through_the_heuristic() {
        let session = generate_session(&SimulatorConfig::default(), "S01").unwrap();
        let map = build_heatmap(&session, 0.01, 5).unwrap();

        let mut scaled = session.clone();
        for block in &mut scaled.blocks {
            for trial in &mut block.trials {
                for window in &mut trial.windows {
                    let mut values = window.features.values;
                    for v in values.iter_mut() {
                        *v *= 3.0;
                    }
                    window.features = FeatureVector::new(values);
                }
            }
        }
        let scaled_map = build_heatmap(&scaled, 0.01, 5).unwrap();
        for i in 0..23 {
            for j in 0..23 {
                assert!(
                    (map.matrix[i][j] - scaled_map.matrix[i][j]).abs() < 1e-9,
                    "({i},{j})"
                );
            }
        }
    }

    #[test]
    fn averaging_identical_maps_is_identity() {
        let session = generate_session(&SimulatorConfig::default(), "S01").unwrap();
        let map = build_heatmap(&session, 0.005, 3).unwrap();
        let averaged = average_heatmaps(&[map.clone(), map.clone()]).unwrap();
        for i in 0..23 {
            for j in 0..23 {
                assert!((averaged.matrix[i][j] - map.matrix[i][j]).abs() < 1e-15);
            }
        }
        assert_eq!(averaged.subject_id, "averaged");
        assert!(average_heatmaps(&[]).is_err());
    }

    #[test]
    fn export_writes_csv_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let session = generate_session(&SimulatorConfig::default(), "S01").unwrap();
        let map = build_heatmap(&session, 0.005, 3).unwrap();
        let csv_path = dir.path().join("heatmap.csv");
        let sidecar = dir.path().join("heatmap.json");
        map.export(&csv_path, &sidecar).unwrap();

        let text = std::fs::read_to_string(&csv_path).unwrap();
        assert_eq!(text.lines().count(), 24); // header + 23 rows
        assert!(text.starts_with("\"Up,Pinch\""));
        let side: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&sidecar).unwrap()).unwrap();
        assert_eq!(side["subject_id"], "S01");
        assert!(side["gamma"].as_f64().unwrap() > 0.0);
    }
}
