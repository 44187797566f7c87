//! The three experiment sweeps and their tidy results table.
//!
//! Each experiment maps a cohort of sessions onto a grid of evaluation
//! cells. Every cell gets a seed derived from the master seed and its own
//! coordinates, and cells run in parallel, so the emitted table is
//! byte-identical across reruns and thread schedules. Per-cell failures are
//! recorded in the table's status column and never abort a sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_condition, AugmentSpec, Condition, SynthesisSpec};
use crate::architectures::ArchitectureKind;
use crate::augmentation::AugmentMethod;
use crate::classifiers::{Algorithm, ClassifierParams};
use crate::dataset::{split_session, SplitSpec};
use crate::error::Result;
use crate::seeds::derive_seed;
use crate::simgen::Session;
use crate::synthesis::{SubsetMode, SubsetStage, SubsetStrategy};

/// Shared axes of the experiment sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentGrid {
    /// Repetitions per cell with distinct derived seeds.
    pub seeds_per_cell: usize,
    /// Synthetic-data fractions explored by the subset experiment and
    /// augmentation fractions explored by the augmentation experiment.
    pub fractions: Vec<f64>,
    /// Fixed synthesis setting under the augmentation experiment: a uniform
    /// subset of this fraction taken after pairing.
    pub exp3_synthesis_fraction: f64,
}

impl Default for ExperimentGrid {
    fn default() -> Self {
        Self {
            seeds_per_cell: 3,
            fractions: vec![0.001, 0.005, 0.01, 0.05, 0.1, 0.25, 0.5],
            exp3_synthesis_fraction: 0.1,
        }
    }
}

/// One row of the tidy results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub subject: String,
    /// Seed index within the cell (0-based).
    pub seed: usize,
    pub experiment: String,
    pub arch: String,
    pub algo: String,
    pub condition: String,
    /// Subset strategy name, or `all_pairs`, or empty for lower/upper.
    pub strategy: String,
    /// The experiment's varying fraction, when one applies.
    pub fraction: Option<f64>,
    pub augment_method: String,
    pub singles_acc: Option<f64>,
    pub doubles_acc: Option<f64>,
    pub overall_acc: Option<f64>,
    /// `ok`, or the error that failed this cell.
    pub status: String,
}

/// Serialize rows as the canonical results CSV.
pub fn results_to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(
        "subject,seed,experiment,arch,algo,condition,strategy,fraction,augment_method,\
         singles_acc,doubles_acc,overall_acc,status\n",
    );
    let fmt_opt = |v: &Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for row in rows {
        // No field in this table can contain a comma or quote.
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            row.subject,
            row.seed,
            row.experiment,
            row.arch,
            row.algo,
            row.condition,
            row.strategy,
            fmt_opt(&row.fraction),
            row.augment_method,
            fmt_opt(&row.singles_acc),
            fmt_opt(&row.doubles_acc),
            fmt_opt(&row.overall_acc),
            row.status,
        ));
    }
    out
}

/// One evaluation cell: a condition at fixed architecture and algorithm.
#[derive(Debug, Clone)]
struct Cell {
    arch: ArchitectureKind,
    algo: Algorithm,
    condition: Condition,
    /// The fraction reported for this cell, when the experiment varies one.
    reported_fraction: Option<f64>,
}

impl Cell {
    fn augment_method_name(&self) -> String {
        match &self.condition {
            Condition::Augmented {
                augment: Some(spec),
                ..
            } => spec.method.name(),
            _ => String::new(),
        }
    }

    fn strategy_name(&self) -> String {
        match &self.condition {
            Condition::Augmented { synthesis, .. } => synthesis.strategy_name(),
            _ => String::new(),
        }
    }
}

fn exp1_cells() -> Vec<Cell> {
    let mut cells = Vec::new();
    for arch in ArchitectureKind::ALL {
        for algo in Algorithm::ALL {
            for condition in [
                Condition::Lower,
                Condition::Augmented {
                    synthesis: SynthesisSpec::AllPairs,
                    augment: None,
                },
                Condition::Upper,
            ] {
                cells.push(Cell {
                    arch,
                    algo,
                    condition,
                    reported_fraction: None,
                });
            }
        }
    }
    cells
}

fn exp2_cells(grid: &ExperimentGrid) -> Vec<Cell> {
    let fixed = (ArchitectureKind::Parallel, Algorithm::Mlp);
    let mut cells = vec![
        Cell {
            arch: fixed.0,
            algo: fixed.1,
            condition: Condition::Lower,
            reported_fraction: None,
        },
        Cell {
            arch: fixed.0,
            algo: fixed.1,
            condition: Condition::Upper,
            reported_fraction: None,
        },
        // Baseline: all possible synthetic pairs.
        Cell {
            arch: fixed.0,
            algo: fixed.1,
            condition: Condition::Augmented {
                synthesis: SynthesisSpec::AllPairs,
                augment: None,
            },
            reported_fraction: None,
        },
    ];
    for stage in SubsetStage::ALL {
        for mode in SubsetMode::ALL {
            for &fraction in &grid.fractions {
                cells.push(Cell {
                    arch: fixed.0,
                    algo: fixed.1,
                    condition: Condition::Augmented {
                        synthesis: SynthesisSpec::Subset(SubsetStrategy {
                            stage,
                            mode,
                            fraction,
                        }),
                        augment: None,
                    },
                    reported_fraction: Some(fraction),
                });
            }
        }
    }
    cells
}

fn exp3_cells(grid: &ExperimentGrid) -> Vec<Cell> {
    let fixed = (ArchitectureKind::Parallel, Algorithm::Mlp);
    let synthesis = SynthesisSpec::Subset(SubsetStrategy {
        stage: SubsetStage::SubsetAfter,
        mode: SubsetMode::Uniform,
        fraction: grid.exp3_synthesis_fraction,
    });
    let mut cells = vec![
        Cell {
            arch: fixed.0,
            algo: fixed.1,
            condition: Condition::Lower,
            reported_fraction: None,
        },
        Cell {
            arch: fixed.0,
            algo: fixed.1,
            condition: Condition::Upper,
            reported_fraction: None,
        },
        // Baseline: the fixed synthesis subset with no augmentation.
        Cell {
            arch: fixed.0,
            algo: fixed.1,
            condition: Condition::Augmented {
                synthesis,
                augment: None,
            },
            reported_fraction: None,
        },
    ];
    for method in AugmentMethod::standard_grid() {
        for &fraction in &grid.fractions {
            cells.push(Cell {
                arch: fixed.0,
                algo: fixed.1,
                condition: Condition::Augmented {
                    synthesis,
                    augment: Some(AugmentSpec { method, fraction }),
                },
                reported_fraction: Some(fraction),
            });
        }
    }
    cells
}

/// Run one experiment's grid over the cohort.
fn run_grid(
    experiment: &str,
    experiment_tag: u64,
    cohort: &[Session],
    cells: &[Cell],
    grid: &ExperimentGrid,
    params: &ClassifierParams,
    master_seed: u64,
) -> Result<Vec<ResultRow>> {
    let splits: Vec<(String, SplitSpec)> = cohort
        .iter()
        .map(|session| Ok((session.subject_id.clone(), split_session(session)?)))
        .collect::<Result<_>>()?;

    struct Job<'a> {
        subject: &'a str,
        split: &'a SplitSpec,
        seed_idx: usize,
        cell_idx: usize,
        cell: &'a Cell,
        seed: u64,
    }

    let mut jobs = Vec::new();
    for (subject_idx, (subject, split)) in splits.iter().enumerate() {
        for seed_idx in 0..grid.seeds_per_cell {
            for (cell_idx, cell) in cells.iter().enumerate() {
                jobs.push(Job {
                    subject,
                    split,
                    seed_idx,
                    cell_idx,
                    cell,
                    seed: derive_seed(
                        master_seed,
                        &[
                            experiment_tag,
                            subject_idx as u64,
                            seed_idx as u64,
                            cell_idx as u64,
                        ],
                    ),
                });
            }
        }
    }

    let mut rows: Vec<(usize, ResultRow)> = jobs
        .par_iter()
        .enumerate()
        .map(|(order, job)| {
            let outcome = run_condition(
                job.split,
                &job.cell.condition,
                job.cell.arch,
                job.cell.algo,
                params,
                job.seed,
            );
            let (singles, doubles, overall, status) = match outcome {
                Ok(report) => (
                    Some(report.singles_acc),
                    Some(report.doubles_acc),
                    Some(report.overall_acc),
                    "ok".to_string(),
                ),
                Err(e) => (None, None, None, format!("error: {e}")),
            };
            let row = ResultRow {
                subject: job.subject.to_string(),
                seed: job.seed_idx,
                experiment: experiment.to_string(),
                arch: job.cell.arch.name().to_string(),
                algo: job.cell.algo.name().to_string(),
                condition: job.cell.condition.name().to_string(),
                strategy: job.cell.strategy_name(),
                fraction: job.cell.reported_fraction,
                augment_method: job.cell.augment_method_name(),
                singles_acc: singles,
                doubles_acc: doubles,
                overall_acc: overall,
                status,
            };
            let _ = job.cell_idx;
            (order, row)
        })
        .collect();
    rows.sort_by_key(|(order, _)| *order);
    Ok(rows.into_iter().map(|(_, row)| row).collect())
}

/// Experiment 1: architectures x algorithms x conditions.
pub fn run_experiment_1(
    cohort: &[Session],
    grid: &ExperimentGrid,
    params: &ClassifierParams,
    master_seed: u64,
) -> Result<Vec<ResultRow>> {
    run_grid("exp1", 1, cohort, &exp1_cells(), grid, params, master_seed)
}

/// Experiment 2: subset strategies x fractions at fixed MLP + parallel.
pub fn run_experiment_2(
    cohort: &[Session],
    grid: &ExperimentGrid,
    params: &ClassifierParams,
    master_seed: u64,
) -> Result<Vec<ResultRow>> {
    run_grid("exp2", 2, cohort, &exp2_cells(grid), grid, params, master_seed)
}

/// Experiment 3: augmentation methods x fractions over a fixed uniform
/// synthesis subset, at fixed MLP + parallel.
pub fn run_experiment_3(
    cohort: &[Session],
    grid: &ExperimentGrid,
    params: &ClassifierParams,
    master_seed: u64,
) -> Result<Vec<ResultRow>> {
    run_grid("exp3", 3, cohort, &exp3_cells(grid), grid, params, master_seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp1_grid_has_eighteen_cells() {
        assert_eq!(exp1_cells().len(), 18);
    }

    #[test]
    fn exp2_grid_covers_strategies_and_fractions() {
        let grid = ExperimentGrid::default();
        assert_eq!(grid.fractions.len(), 7);
        // lower + upper + baseline + 2 stages x 3 modes x 7 fractions.
        assert_eq!(exp2_cells(&grid).len(), 3 + 42);
    }

    #[test]
    fn exp3_grid_covers_methods_and_fractions() {
        let grid = ExperimentGrid::default();
        // lower + upper + baseline + 7 methods x 7 fractions.
        assert_eq!(exp3_cells(&grid).len(), 3 + 49);
        let baseline = &exp3_cells(&grid)[2];
        match &baseline.condition {
            Condition::Augmented {
                synthesis: SynthesisSpec::Subset(strategy),
                augment: None,
            } => {
                assert_eq!(strategy.fraction, 0.1);
                assert_eq!(strategy.mode, SubsetMode::Uniform);
                assert_eq!(strategy.stage, SubsetStage::SubsetAfter);
            }
            other => panic!("unexpected baseline: {other:?}"),
        }
    }

    #[test]
    fn csv_is_stable_and_has_13_columns() {
        let rows = vec![ResultRow {
            subject: "S01".into(),
            seed: 0,
            experiment: "exp1".into(),
            arch: "parallel".into(),
            algo: "mlp".into(),
            condition: "augmented".into(),
            strategy: "all_pairs".into(),
            fraction: None,
            augment_method: String::new(),
            singles_acc: Some(0.9125),
            doubles_acc: Some(0.75),
            overall_acc: Some(0.825),
            status: "ok".into(),
        }];
        let csv = results_to_csv(&rows);
        let mut lines = csv.lines();
        let header = lines.next().unwrap();
        assert_eq!(header.split(',').count(), 13);
        let row = lines.next().unwrap();
        assert_eq!(row.split(',').count(), 13);
        assert!(row.contains("0.9125"));
        assert_eq!(results_to_csv(&rows), csv);
    }
}
