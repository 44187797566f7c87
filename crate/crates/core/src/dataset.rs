//! Labeled examples, the train/special/test split protocol, and session
//! persistence.
//!
//! A session persists as two files: `<base>.session.json` (format version,
//! config, seeds, class order, block structure) and `<base>.features.csv`
//! (one row per window: subject, block, trial, label, 16 features). Both
//! are written atomically via a temp file and rename, and round-trip
//! byte-identically.

use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::labels::{enumerate_classes, GestureLabel, LabelKind};
use crate::signal::{EmgWindow, FeatureVector, FEATURE_DIM};
use crate::simgen::{Block, BlockType, LabeledWindow, Session, SimulatorConfig, Trial};

/// Where an example came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Recorded (simulated) data.
    Real,
    /// Blended from two real single-gesture examples.
    SyntheticDouble,
    /// Sampled from an augmentation model of a single-gesture class.
    AugmentedSingle,
}

/// One feature vector with its label and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub features: FeatureVector,
    pub label: GestureLabel,
    pub provenance: Provenance,
    pub subject_id: String,
    pub block_tag: String,
}

/// The three disjoint parts of one subject's data.
///
/// `train` holds the Calibration singles, `special` the first two HP and SP
/// blocks (real singles and doubles), and `test` the final HP and SP blocks.
#[derive(Debug, Clone)]
pub struct SplitSpec {
    pub train: Vec<LabeledExample>,
    pub special: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
}

fn block_tag(block_type: BlockType, ordinal: usize) -> String {
    match block_type {
        BlockType::Calibration => "calibration".to_string(),
        BlockType::Hp => format!("hp{ordinal}"),
        BlockType::Sp => format!("sp{ordinal}"),
    }
}

fn block_examples(session: &Session, block: &Block, tag: &str) -> Vec<LabeledExample> {
    block
        .trials
        .iter()
        .flat_map(|trial| trial.windows.iter())
        .map(|window| LabeledExample {
            features: window.features,
            label: window.label,
            provenance: Provenance::Real,
            subject_id: session.subject_id.clone(),
            block_tag: tag.to_string(),
        })
        .collect()
}

/// Split a canonical session into train / special / test parts.
///
/// Train takes only non-combination examples from Calibration (combination
/// windows there would be accidental and are excluded); special takes HP1,
/// SP1, HP2, SP2; test takes the final HP and SP blocks.
pub fn split_session(session: &Session) -> Result<SplitSpec> {
    session.check_structure()?;

    let mut hp_seen = 0;
    let mut sp_seen = 0;
    let mut train = Vec::new();
    let mut special = Vec::new();
    let mut test = Vec::new();

    for block in &session.blocks {
        match block.block_type {
            BlockType::Calibration => {
                train.extend(
                    block_examples(session, block, "calibration")
                        .into_iter()
                        .filter(|e| e.label.kind() != LabelKind::Double),
                );
            }
            BlockType::Hp => {
                hp_seen += 1;
                let examples = block_examples(session, block, &block_tag(BlockType::Hp, hp_seen));
                if hp_seen <= 2 {
                    special.extend(examples);
                } else {
                    test.extend(examples);
                }
            }
            BlockType::Sp => {
                sp_seen += 1;
                let examples = block_examples(session, block, &block_tag(BlockType::Sp, sp_seen));
                if sp_seen <= 2 {
                    special.extend(examples);
                } else {
                    test.extend(examples);
                }
            }
        }
    }

    Ok(SplitSpec {
        train,
        special,
        test,
    })
}

/// Supported session file format version.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TrialHeader {
    instructed: String,
    window_count: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct BlockHeader {
    block_type: BlockType,
    trials: Vec<TrialHeader>,
}

/// Raw samples for one window: `channels x T`.
type RawWindow = Vec<Vec<f64>>;

#[derive(Debug, Serialize, Deserialize)]
struct SessionHeader {
    format_version: u32,
    subject_id: String,
    seed: u64,
    config: SimulatorConfig,
    class_order: Vec<String>,
    blocks: Vec<BlockHeader>,
    has_raw: bool,
    /// Raw windows in file order (block-major, then trial, then window),
    /// present only when `has_raw`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    raw: Option<Vec<RawWindow>>,
}

fn session_paths(base: &Path) -> (PathBuf, PathBuf) {
    let mut json = base.as_os_str().to_owned();
    json.push(".session.json");
    let mut csv = base.as_os_str().to_owned();
    csv.push(".features.csv");
    (PathBuf::from(json), PathBuf::from(csv))
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Persist a session as `<base>.session.json` + `<base>.features.csv`.
pub fn save_session(session: &Session, base: &Path) -> Result<()> {
    session.check_structure()?;
    let has_raw = session
        .blocks
        .iter()
        .flat_map(|b| &b.trials)
        .flat_map(|t| &t.windows)
        .all(|w| w.raw.is_some())
        && !session.blocks.is_empty();

    let raw = if has_raw {
        Some(
            session
                .blocks
                .iter()
                .flat_map(|b| &b.trials)
                .flat_map(|t| &t.windows)
                .map(|w| w.raw.as_ref().expect("checked has_raw").samples.clone())
                .collect(),
        )
    } else {
        None
    };

    let header = SessionHeader {
        format_version: FORMAT_VERSION,
        subject_id: session.subject_id.clone(),
        seed: session.seed,
        config: session.config.clone(),
        class_order: enumerate_classes().iter().map(|l| l.to_string()).collect(),
        blocks: session
            .blocks
            .iter()
            .map(|b| BlockHeader {
                block_type: b.block_type,
                trials: b
                    .trials
                    .iter()
                    .map(|t| TrialHeader {
                        instructed: t.instructed.to_string(),
                        window_count: t.windows.len(),
                    })
                    .collect(),
            })
            .collect(),
        has_raw,
        raw,
    };

    let (json_path, csv_path) = session_paths(base);
    let mut json = serde_json::to_vec_pretty(&header)
        .map_err(|e| Error::Corrupt(format!("header serialization: {e}")))?;
    json.push(b'\n');
    write_atomic(&json_path, &json)?;

    let mut csv_buf = Vec::new();
    {
        let mut writer = csv::Writer::from_writer(&mut csv_buf);
        let mut header_row = vec![
            "subject_id".to_string(),
            "block_index".to_string(),
            "block_type".to_string(),
            "trial_index".to_string(),
            "label".to_string(),
        ];
        header_row.extend((0..FEATURE_DIM).map(|i| format!("f{i}")));
        writer
            .write_record(&header_row)
            .map_err(|e| Error::Corrupt(format!("csv write: {e}")))?;

        for (block_index, block) in session.blocks.iter().enumerate() {
            for (trial_index, trial) in block.trials.iter().enumerate() {
                for window in &trial.windows {
                    let mut record = vec![
                        session.subject_id.clone(),
                        block_index.to_string(),
                        block.block_type.name().to_string(),
                        trial_index.to_string(),
                        window.label.to_string(),
                    ];
                    record.extend(window.features.as_slice().iter().map(|v| v.to_string()));
                    writer
                        .write_record(&record)
                        .map_err(|e| Error::Corrupt(format!("csv write: {e}")))?;
                }
            }
        }
        writer
            .flush()
            .map_err(|e| Error::Corrupt(format!("csv flush: {e}")))?;
    }
    write_atomic(&csv_path, &csv_buf)?;
    Ok(())
}

fn classify_json_error(e: serde_json::Error) -> Error {
    if e.is_data() {
        Error::MissingField(e.to_string())
    } else {
        Error::Corrupt(e.to_string())
    }
}

/// Load a session saved by [`save_session`].
pub fn load_session(base: &Path) -> Result<Session> {
    let (json_path, csv_path) = session_paths(base);
    let json = fs::read_to_string(&json_path)?;

    // Check the declared version before strict field decoding so future
    // formats report a version error rather than a field error.
    let value: serde_json::Value =
        serde_json::from_str(&json).map_err(|e| Error::Corrupt(e.to_string()))?;
    let found = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::MissingField("format_version".into()))? as u32;
    if found > FORMAT_VERSION {
        return Err(Error::Version {
            found,
            supported: FORMAT_VERSION,
        });
    }
    let header: SessionHeader = serde_json::from_value(value).map_err(classify_json_error)?;

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(&csv_path)
        .map_err(|e| Error::Corrupt(format!("{}: {e}", csv_path.display())))?;

    struct Row {
        block_index: usize,
        trial_index: usize,
        label: GestureLabel,
        features: FeatureVector,
    }

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Corrupt(format!("csv parse: {e}")))?;
        if record.len() != 5 + FEATURE_DIM {
            return Err(Error::Corrupt(format!(
                "csv row has {} fields, expected {}",
                record.len(),
                5 + FEATURE_DIM
            )));
        }
        let parse_index = |field: &str, what: &str| -> Result<usize> {
            field
                .parse()
                .map_err(|_| Error::Corrupt(format!("bad {what}: {field:?}")))
        };
        let mut features = [0.0; FEATURE_DIM];
        for (i, v) in features.iter_mut().enumerate() {
            *v = record[5 + i]
                .parse()
                .map_err(|_| Error::Corrupt(format!("bad feature value: {:?}", &record[5 + i])))?;
        }
        rows.push(Row {
            block_index: parse_index(&record[1], "block index")?,
            trial_index: parse_index(&record[3], "trial index")?,
            label: record[4]
                .parse()
                .map_err(|_| Error::Corrupt(format!("bad label: {:?}", &record[4])))?,
            features: FeatureVector::new(features),
        });
    }

    let total_windows: usize = header
        .blocks
        .iter()
        .flat_map(|b| &b.trials)
        .map(|t| t.window_count)
        .sum();
    if rows.len() != total_windows {
        return Err(Error::Corrupt(format!(
            "csv holds {} windows but the header declares {total_windows}",
            rows.len()
        )));
    }
    let raw_windows = if header.has_raw {
        let raw = header
            .raw
            .as_ref()
            .ok_or_else(|| Error::MissingField("raw (has_raw is set)".into()))?;
        if raw.len() != total_windows {
            return Err(Error::Corrupt(format!(
                "{} raw windows but {total_windows} declared",
                raw.len()
            )));
        }
        Some(raw)
    } else {
        None
    };

    let mut blocks = Vec::with_capacity(header.blocks.len());
    let mut cursor = 0usize;
    for (block_index, block_header) in header.blocks.iter().enumerate() {
        let mut trials = Vec::with_capacity(block_header.trials.len());
        for (trial_index, trial_header) in block_header.trials.iter().enumerate() {
            let instructed: GestureLabel = trial_header
                .instructed
                .parse()
                .map_err(|_| Error::Corrupt(format!("bad label {:?}", trial_header.instructed)))?;
            let mut windows = Vec::with_capacity(trial_header.window_count);
            for _ in 0..trial_header.window_count {
                let row = &rows[cursor];
                if row.block_index != block_index || row.trial_index != trial_index {
                    return Err(Error::Corrupt(format!(
                        "csv row {cursor} is ({}, {}) but the header expects ({block_index}, {trial_index})",
                        row.block_index, row.trial_index
                    )));
                }
                let raw = match raw_windows {
                    Some(raw) => Some(EmgWindow::new(
                        raw[cursor].clone(),
                        header.config.sample_rate,
                    )?),
                    None => None,
                };
                windows.push(LabeledWindow {
                    label: row.label,
                    features: row.features,
                    raw,
                });
                cursor += 1;
            }
            trials.push(Trial {
                instructed,
                windows,
            });
        }
        blocks.push(Block {
            block_type: block_header.block_type,
            trials,
        });
    }

    let session = Session {
        subject_id: header.subject_id,
        seed: header.seed,
        config: header.config,
        blocks,
    };
    session.check_structure()?;
    Ok(session)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::generate_session;
    use std::collections::HashSet;

    fn small_session() -> Session {
        generate_session(&SimulatorConfig::default(), "S01").unwrap()
    }

    #[test]
    fn split_parts_are_disjoint_and_complete() {
        let session = small_session();
        let split = split_session(&session).unwrap();

        assert!(!split.train.is_empty());
        assert!(!split.special.is_empty());
        assert!(!split.test.is_empty());

        // Train has no combination examples.
        assert!(split.train.iter().all(|e| !e.label.is_double()));
        // Special and test both mix singles and doubles.
        for part in [&split.special, &split.test] {
            assert!(part.iter().any(|e| e.label.is_double()));
            assert!(part.iter().any(|e| !e.label.is_double()));
        }

        // Test comes from exactly the final two blocks.
        let test_tags: HashSet<&str> = split.test.iter().map(|e| e.block_tag.as_str()).collect();
        assert_eq!(test_tags, HashSet::from(["hp3", "sp3"]));
        let special_tags: HashSet<&str> =
            split.special.iter().map(|e| e.block_tag.as_str()).collect();
        assert_eq!(special_tags, HashSet::from(["hp1", "sp1", "hp2", "sp2"]));

        // No window is shared between parts (block tags partition them).
        let train_tags: HashSet<&str> = split.train.iter().map(|e| e.block_tag.as_str()).collect();
        assert!(train_tags.is_disjoint(&special_tags));
        assert!(train_tags.is_disjoint(&test_tags));
        assert!(special_tags.is_disjoint(&test_tags));
    }

    #[test]
    fn split_rejects_malformed_sessions() {
        let mut session = small_session();
        session.blocks.remove(3);
        assert!(matches!(split_session(&session), Err(Error::Structure(_))));
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("subject");
        let session = small_session();
        save_session(&session, &base).unwrap();
        let loaded = load_session(&base).unwrap();
        assert_eq!(session, loaded);
    }

    #[test]
    fn second_save_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let base_a = dir.path().join("a");
        let base_b = dir.path().join("b");
        let session = small_session();
        save_session(&session, &base_a).unwrap();
        let loaded = load_session(&base_a).unwrap();
        save_session(&loaded, &base_b).unwrap();

        for suffix in [".session.json", ".features.csv"] {
            let a = fs::read(dir.path().join(format!("a{suffix}"))).unwrap();
            let b = fs::read(dir.path().join(format!("b{suffix}"))).unwrap();
            assert_eq!(a, b, "{suffix} differs");
        }
    }

    #[test]
    fn raw_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("raw");
        let config = SimulatorConfig {
            retain_raw: true,
            ..SimulatorConfig::default()
        };
        let session = generate_session(&config, "S01").unwrap();
        save_session(&session, &base).unwrap();
        let loaded = load_session(&base).unwrap();
        assert_eq!(session, loaded);
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("subject");
        save_session(&small_session(), &base).unwrap();

        let json_path = dir.path().join("subject.session.json");
        let text = fs::read_to_string(&json_path).unwrap();
        fs::write(&json_path, &text[..text.len() / 2]).unwrap();
        assert!(matches!(load_session(&base), Err(Error::Corrupt(_))));
    }

    #[test]
    fn future_version_is_a_version_error() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("subject");
        save_session(&small_session(), &base).unwrap();

        let json_path = dir.path().join("subject.session.json");
        let text = fs::read_to_string(&json_path).unwrap();
        let bumped = text.replace(
            "\"format_version\": 1",
            "\"format_version\": 99",
        );
        assert_ne!(text, bumped);
        fs::write(&json_path, bumped).unwrap();
        assert!(matches!(
            load_session(&base),
            Err(Error::Version { found: 99, .. })
        ));
    }

    #[test]
    fn missing_field_is_distinct() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("subject");
        save_session(&small_session(), &base).unwrap();

        let json_path = dir.path().join("subject.session.json");
        let text = fs::read_to_string(&json_path).unwrap();
        let without_subject = text.replace("\"subject_id\": \"S01\",", "");
        assert_ne!(text, without_subject);
        fs::write(&json_path, without_subject).unwrap();
        assert!(matches!(load_session(&base), Err(Error::MissingField(_))));
    }

    #[test]
    fn csv_header_mismatch_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("subject");
        save_session(&small_session(), &base).unwrap();

        let csv_path = dir.path().join("subject.features.csv");
        let text = fs::read_to_string(&csv_path).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines.truncate(lines.len() - 5);
        fs::write(&csv_path, lines.join("\n")).unwrap();
        assert!(matches!(load_session(&base), Err(Error::Corrupt(_))));
    }
}

