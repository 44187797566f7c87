//! Parametric session simulator.
//!
//! Produces labeled multi-channel recordings with the canonical block
//! structure: a Calibration block of single gestures, then alternating
//! Hold-Pulse (HP) and Simultaneous-Pulse (SP) combination blocks.
//!
//! Signal model per channel: a class-specific amplitude scales a shared
//! in-band multi-tone process (random phases per trial), plus white noise.
//! Expected RMS is therefore proportional to the amplitude profile, so at
//! `double_interaction = 0` a combination gesture's expected features equal
//! the mean of its components' expected features, and feature blending is
//! exactly the right generative assumption. Raising `double_interaction`
//! pulls combination profiles toward a seeded class-specific distortion,
//! making blends increasingly wrong.
//!
//! Trials are sequences of constant-label segments; analysis windows are
//! cut per segment so window labels are exact by construction. Pulsed
//! single-gesture trials include a rest gap between pulses, which is where
//! HP blocks pick up rest examples; trials mixing a held and a pulsed
//! component contribute windows of both the single and the double label.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::labels::{enumerate_double_classes, Direction, GestureLabel, Modifier};
use crate::seeds::{derive_seed, rng_from_seed};
use crate::signal::{featurize_window, sliding_windows, window_sizes, EmgWindow, FeatureVector};

/// Tones of the shared band-limited source process, as periodogram bin
/// indices of one analysis window. Bin-aligned tones have no spectral
/// leakage under the rectangular window, so the median power frequency of
/// active channels is stable instead of flickering between bins.
const TONE_BINS: [usize; 8] = [11, 15, 20, 25, 30, 37, 46, 55];

/// Tone weights; power concentrates at the fourth tone (bin 25, about
/// 100 Hz at the default rate) so it carries just over half the power and
/// pins the median power frequency there.
const TONE_WEIGHTS: [f64; 8] = [0.5, 0.6, 0.8, 1.8, 0.9, 0.7, 0.6, 0.5];

/// Simulator parameters. Every field has a documented default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulatorConfig {
    pub sample_rate: f64,
    pub channels: usize,
    /// Analysis window length and step used when featurizing trials.
    pub window_ms: f64,
    pub step_ms: f64,
    /// Channel amplitude profile per active direction (Up, Down, Left, Right).
    pub direction_profiles: Vec<Vec<f64>>,
    /// Channel amplitude profile per active modifier (Pinch, Thumb).
    pub modifier_profiles: Vec<Vec<f64>>,
    /// Standard deviation of the additive white sensor noise.
    pub noise_std: f64,
    /// Log-normal sigma of the per-trial, per-channel amplitude jitter.
    pub amplitude_jitter: f64,
    /// Log-normal sigma of the per-subject profile variation.
    pub subject_variability: f64,
    /// In [0, 1]: how far combination-gesture profiles deviate from the
    /// additive mean of their components toward a seeded distortion.
    pub double_interaction: f64,
    /// Active-segment durations in seconds.
    pub calibration_secs: f64,
    pub hold_secs: f64,
    pub pulse_secs: f64,
    pub rest_gap_secs: f64,
    /// Keep raw windows alongside features.
    pub retain_raw: bool,
    /// Master seed; cohort generation derives per-subject seeds from it.
    pub seed: u64,
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        Self {
            sample_rate: 1926.0,
            channels: 8,
            window_ms: 250.0,
            step_ms: 50.0,
            direction_profiles: vec![
                vec![1.6, 1.2, 0.6, 0.4, 0.4, 0.4, 0.6, 1.2],
                vec![0.6, 0.4, 0.4, 0.6, 1.2, 1.6, 1.2, 0.6],
                vec![0.4, 0.6, 1.2, 1.6, 1.2, 0.6, 0.4, 0.4],
                vec![1.2, 0.6, 0.4, 0.4, 0.6, 1.2, 1.6, 1.2],
            ],
            modifier_profiles: vec![
                vec![0.5, 1.4, 0.5, 1.4, 0.5, 1.4, 0.5, 1.4],
                vec![1.4, 0.5, 1.4, 0.5, 1.4, 0.5, 1.4, 0.5],
            ],
            noise_std: 0.05,
            amplitude_jitter: 0.08,
            subject_variability: 0.12,
            double_interaction: 0.35,
            calibration_secs: 0.3,
            hold_secs: 0.5,
            pulse_secs: 0.3,
            rest_gap_secs: 0.3,
            retain_raw: false,
            seed: 7,
        }
    }
}

impl SimulatorConfig {
    /// Validate the configuration, listing every offending field.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.sample_rate > 0.0) {
            problems.push("sample_rate must be positive".to_string());
        }
        if self.channels != 8 {
            problems.push(format!(
                "channels: featurization is defined for 8 channels, got {}",
                self.channels
            ));
        }
        if self.direction_profiles.len() != Direction::ACTIVE.len() {
            problems.push(format!(
                "direction_profiles: expected {} profiles, got {}",
                Direction::ACTIVE.len(),
                self.direction_profiles.len()
            ));
        }
        if self.modifier_profiles.len() != Modifier::ACTIVE.len() {
            problems.push(format!(
                "modifier_profiles: expected {} profiles, got {}",
                Modifier::ACTIVE.len(),
                self.modifier_profiles.len()
            ));
        }
        for (name, profiles) in [
            ("direction_profiles", &self.direction_profiles),
            ("modifier_profiles", &self.modifier_profiles),
        ] {
            for (i, p) in profiles.iter().enumerate() {
                if p.len() != self.channels {
                    problems.push(format!(
                        "{name}[{i}]: expected {} channels, got {}",
                        self.channels,
                        p.len()
                    ));
                }
                if p.iter().any(|&v| !v.is_finite() || v < 0.0) {
                    problems.push(format!("{name}[{i}]: amplitudes must be non-negative"));
                }
            }
        }
        if !(self.noise_std > 0.0) {
            problems.push("noise_std must be positive".to_string());
        }
        if self.amplitude_jitter < 0.0 || self.subject_variability < 0.0 {
            problems.push("jitter sigmas must be non-negative".to_string());
        }
        if !(0.0..=1.0).contains(&self.double_interaction) {
            problems.push(format!(
                "double_interaction {} must be in [0, 1]",
                self.double_interaction
            ));
        }
        match window_sizes(self.sample_rate, self.window_ms, self.step_ms) {
            Ok((w, _)) => {
                for (name, secs) in [
                    ("calibration_secs", self.calibration_secs),
                    ("hold_secs", self.hold_secs),
                    ("pulse_secs", self.pulse_secs),
                    ("rest_gap_secs", self.rest_gap_secs),
                ] {
                    let samples = (secs * self.sample_rate).floor() as usize;
                    if samples < w {
                        problems.push(format!(
                            "{name}: {secs} s is {samples} samples, below one {w}-sample window"
                        ));
                    }
                }
            }
            Err(e) => problems.push(format!("window_ms/step_ms: {e}")),
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems.join("; ")))
        }
    }
}

/// Kind of experiment block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockType {
    Calibration,
    Hp,
    Sp,
}

impl BlockType {
    pub fn name(self) -> &'static str {
        match self {
            BlockType::Calibration => "calibration",
            BlockType::Hp => "hp",
            BlockType::Sp => "sp",
        }
    }
}

/// One featurized analysis window with its exact label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledWindow {
    pub label: GestureLabel,
    pub features: FeatureVector,
    /// Raw samples, kept only when the config retains them.
    pub raw: Option<EmgWindow>,
}

/// One instructed gesture trial: an ordered sequence of labeled windows.
///
/// Windows can carry labels other than the instruction: a pulsed component
/// is absent between pulses, so e.g. a held-direction trial with a pulsed
/// modifier yields both `(D, NoMod)` and `(D, M)` windows.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub instructed: GestureLabel,
    pub windows: Vec<LabeledWindow>,
}

/// One block of trials.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub block_type: BlockType,
    pub trials: Vec<Trial>,
}

/// One simulated subject's recording session.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub subject_id: String,
    /// Seed this session was generated from.
    pub seed: u64,
    pub config: SimulatorConfig,
    pub blocks: Vec<Block>,
}

impl Session {
    /// Trial counts per block in canonical order.
    pub const CANONICAL_BLOCKS: [(BlockType, usize); 7] = [
        (BlockType::Calibration, 56),
        (BlockType::Hp, 28),
        (BlockType::Sp, 8),
        (BlockType::Hp, 28),
        (BlockType::Sp, 8),
        (BlockType::Hp, 28),
        (BlockType::Sp, 8),
    ];

    /// Check the block sequence and trial counts against the canonical layout.
    pub fn check_structure(&self) -> Result<()> {
        if self.blocks.len() != Self::CANONICAL_BLOCKS.len() {
            return Err(Error::Structure(format!(
                "expected {} blocks, found {}",
                Self::CANONICAL_BLOCKS.len(),
                self.blocks.len()
            )));
        }
        for (i, (block, (expected_type, expected_trials))) in
            self.blocks.iter().zip(Self::CANONICAL_BLOCKS).enumerate()
        {
            if block.block_type != expected_type {
                return Err(Error::Structure(format!(
                    "block {i}: expected {}, found {}",
                    expected_type.name(),
                    block.block_type.name()
                )));
            }
            if block.trials.len() != expected_trials {
                return Err(Error::Structure(format!(
                    "block {i} ({}): expected {expected_trials} trials, found {}",
                    block.block_type.name(),
                    block.trials.len()
                )));
            }
        }
        Ok(())
    }
}

/// Per-subject realization of the class amplitude profiles.
#[derive(Debug, Clone)]
struct SubjectProfiles {
    directions: Vec<Vec<f64>>,
    modifiers: Vec<Vec<f64>>,
    /// Seeded distortion target per combination class, canonical order.
    distortions: Vec<Vec<f64>>,
}

impl SubjectProfiles {
    fn draw(config: &SimulatorConfig, rng: &mut ChaCha12Rng) -> Self {
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let mut jittered = |base: &[Vec<f64>]| -> Vec<Vec<f64>> {
            base.iter()
                .map(|profile| {
                    profile
                        .iter()
                        .map(|&a| a * (config.subject_variability * normal.sample(rng)).exp())
                        .collect()
                })
                .collect()
        };
        let directions = jittered(&config.direction_profiles);
        let modifiers = jittered(&config.modifier_profiles);

        // Distortion targets live in the same amplitude range as the
        // profiles so interaction moves doubles without changing scale.
        let all_amps: Vec<f64> = directions
            .iter()
            .chain(&modifiers)
            .flatten()
            .copied()
            .collect();
        let lo = all_amps.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = all_amps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let distortions = enumerate_double_classes()
            .iter()
            .map(|_| {
                (0..config.channels)
                    .map(|_| lo + (hi - lo) * rng.random::<f64>())
                    .collect()
            })
            .collect();

        Self {
            directions,
            modifiers,
            distortions,
        }
    }

    /// Channel amplitudes for a class; rest is all zeros.
    fn amplitudes(&self, label: GestureLabel, interaction: f64, channels: usize) -> Vec<f64> {
        let dir = label
            .direction
            .is_active()
            .then(|| &self.directions[label.direction.index()]);
        let modif = label
            .modifier
            .is_active()
            .then(|| &self.modifiers[label.modifier.index()]);
        match (dir, modif) {
            (Some(d), None) => d.clone(),
            (None, Some(m)) => m.clone(),
            (None, None) => vec![0.0; channels],
            (Some(d), Some(m)) => {
                let double_idx = enumerate_double_classes()
                    .iter()
                    .position(|l| *l == label)
                    .expect("double class");
                let distortion = &self.distortions[double_idx];
                d.iter()
                    .zip(m)
                    .zip(distortion)
                    .map(|((&a, &b), &z)| (1.0 - interaction) * (a + b) / 2.0 + interaction * z)
                    .collect()
            }
        }
    }
}

/// Tone frequencies in Hz for a given config: bin indices scaled by the
/// analysis-window bin width, and per-tone amplitudes normalizing the
/// summed tone power to 1 so expected RMS equals the channel amplitude.
fn tone_table(config: &SimulatorConfig) -> Vec<(f64, f64)> {
    let (w, _) = window_sizes(config.sample_rate, config.window_ms, config.step_ms)
        .expect("validated config");
    let bin_width = config.sample_rate / w as f64;
    let power: f64 = TONE_WEIGHTS.iter().map(|&w| w * w / 2.0).sum();
    let scale = power.sqrt().recip();
    TONE_BINS
        .iter()
        .zip(&TONE_WEIGHTS)
        .map(|(&bin, &weight)| (bin as f64 * bin_width, scale * weight))
        .collect()
}

/// Synthesize one constant-label segment: amplitude-scaled multi-tone source
/// plus white noise, per channel.
fn synth_segment(
    amplitudes: &[f64],
    secs: f64,
    tones: &[(f64, f64)],
    config: &SimulatorConfig,
    rng: &mut ChaCha12Rng,
) -> Vec<Vec<f64>> {
    let n = (secs * config.sample_rate).floor() as usize;
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut channels = Vec::with_capacity(config.channels);
    for &amp in amplitudes {
        let jitter = (config.amplitude_jitter * normal.sample(rng)).exp();
        let a = amp * jitter;
        let phases: Vec<f64> = tones.iter().map(|_| rng.random::<f64>() * TAU).collect();
        let mut samples = Vec::with_capacity(n);
        for t in 0..n {
            let time = t as f64 / config.sample_rate;
            let mut tone = 0.0;
            for (&(f, tone_amp), &phase) in tones.iter().zip(&phases) {
                tone += tone_amp * (TAU * f * time + phase).sin();
            }
            samples.push(a * tone + config.noise_std * normal.sample(rng));
        }
        channels.push(samples);
    }
    channels
}

/// The labeled segments making up one trial.
struct TrialPlan {
    instructed: GestureLabel,
    segments: Vec<(GestureLabel, f64)>,
}

fn held_pulsed_plan(held: GestureLabel, both: GestureLabel, pulse: f64) -> TrialPlan {
    TrialPlan {
        instructed: both,
        segments: vec![(held, pulse), (both, pulse), (held, pulse)],
    }
}

fn block_plans(block_type: BlockType, config: &SimulatorConfig) -> Vec<TrialPlan> {
    let doubles = enumerate_double_classes();
    match block_type {
        BlockType::Calibration => {
            let singles: Vec<GestureLabel> = crate::labels::enumerate_single_classes();
            let mut plans = Vec::with_capacity(56);
            for label in singles {
                for _ in 0..8 {
                    plans.push(TrialPlan {
                        instructed: label,
                        segments: vec![(label, config.calibration_secs)],
                    });
                }
            }
            plans
        }
        BlockType::Hp => {
            let mut plans = Vec::with_capacity(28);
            // Held direction with pulsed modifier: all 8 combinations.
            for &label in &doubles {
                let held = GestureLabel::new(label.direction, Modifier::NoMod);
                plans.push(held_pulsed_plan(held, label, config.pulse_secs));
            }
            // Held modifier with pulsed direction: all 8 combinations.
            for &label in &doubles {
                let held = GestureLabel::new(Direction::NoDir, label.modifier);
                plans.push(held_pulsed_plan(held, label, config.pulse_secs));
            }
            // Held singles.
            for direction in Direction::ACTIVE {
                let label = GestureLabel::new(direction, Modifier::NoMod);
                plans.push(TrialPlan {
                    instructed: label,
                    segments: vec![(label, config.hold_secs)],
                });
            }
            for modifier in Modifier::ACTIVE {
                let label = GestureLabel::new(Direction::NoDir, modifier);
                plans.push(TrialPlan {
                    instructed: label,
                    segments: vec![(label, config.hold_secs)],
                });
            }
            // Pulsed singles, resting between pulses.
            for direction in Direction::ACTIVE {
                let label = GestureLabel::new(direction, Modifier::NoMod);
                plans.push(TrialPlan {
                    instructed: label,
                    segments: vec![
                        (label, config.pulse_secs),
                        (GestureLabel::REST, config.rest_gap_secs),
                        (label, config.pulse_secs),
                    ],
                });
            }
            for modifier in Modifier::ACTIVE {
                let label = GestureLabel::new(Direction::NoDir, modifier);
                plans.push(TrialPlan {
                    instructed: label,
                    segments: vec![
                        (label, config.pulse_secs),
                        (GestureLabel::REST, config.rest_gap_secs),
                        (label, config.pulse_secs),
                    ],
                });
            }
            plans
        }
        BlockType::Sp => doubles
            .iter()
            .map(|&label| TrialPlan {
                instructed: label,
                segments: vec![(label, config.pulse_secs)],
            })
            .collect(),
    }
}

fn generate_trial(
    plan: &TrialPlan,
    config: &SimulatorConfig,
    profiles: &SubjectProfiles,
    tones: &[(f64, f64)],
    rng: &mut ChaCha12Rng,
) -> Result<Trial> {
    let mut windows = Vec::new();
    for &(label, secs) in &plan.segments {
        let amplitudes = profiles.amplitudes(label, config.double_interaction, config.channels);
        let signal = synth_segment(&amplitudes, secs, tones, config, rng);
        for window in sliding_windows(&signal, config.sample_rate, config.window_ms, config.step_ms)? {
            let features = featurize_window(&window)?;
            windows.push(LabeledWindow {
                label,
                features,
                raw: config.retain_raw.then_some(window),
            });
        }
    }
    Ok(Trial {
        instructed: plan.instructed,
        windows,
    })
}

/// Generate one session. Fully reproducible from `config.seed`.
pub fn generate_session(config: &SimulatorConfig, subject_id: &str) -> Result<Session> {
    config.validate()?;
    let mut subject_rng = rng_from_seed(derive_seed(config.seed, &[0x5b]));
    let profiles = SubjectProfiles::draw(config, &mut subject_rng);
    let tones = tone_table(config);

    let mut blocks = Vec::with_capacity(Session::CANONICAL_BLOCKS.len());
    for (block_idx, (block_type, _)) in Session::CANONICAL_BLOCKS.iter().enumerate() {
        let plans = block_plans(*block_type, config);
        let mut trials = Vec::with_capacity(plans.len());
        for (trial_idx, plan) in plans.iter().enumerate() {
            let mut trial_rng =
                rng_from_seed(derive_seed(config.seed, &[block_idx as u64, trial_idx as u64]));
            trials.push(generate_trial(plan, config, &profiles, &tones, &mut trial_rng)?);
        }
        blocks.push(Block {
            block_type: *block_type,
            trials,
        });
    }

    let session = Session {
        subject_id: subject_id.to_string(),
        seed: config.seed,
        config: config.clone(),
        blocks,
    };
    session.check_structure()?;
    Ok(session)
}

/// Generate a cohort with per-subject seeds derived from the master seed.
pub fn generate_cohort(config: &SimulatorConfig, n_subjects: usize) -> Result<Vec<Session>> {
    if n_subjects == 0 {
        return Err(Error::InvalidConfig("cohort needs at least one subject".into()));
    }
    config.validate()?;
    (0..n_subjects)
        .map(|i| {
            let mut subject_config = config.clone();
            subject_config.seed = derive_seed(config.seed, &[0x50b, i as u64]);
            generate_session(&subject_config, &format!("S{:02}", i + 1))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::LabelKind;

    #[test]
    fn default_config_is_valid() {
        SimulatorConfig::default().validate().unwrap();
    }

    #[test]
    fn invalid_config_lists_fields() {
        let config = SimulatorConfig {
            noise_std: 0.0,
            double_interaction: 1.5,
            ..SimulatorConfig::default()
        };
        match config.validate() {
            Err(Error::InvalidConfig(msg)) => {
                assert!(msg.contains("noise_std"), "{msg}");
                assert!(msg.contains("double_interaction"), "{msg}");
            }
            other => panic!("expected InvalidConfig, got {other:?}"),
        }
    }

    #[test]
    fn canonical_block_structure() {
        let session = generate_session(&SimulatorConfig::default(), "S01").unwrap();
        assert_eq!(session.blocks.len(), 7);
        assert_eq!(session.blocks[0].block_type, BlockType::Calibration);
        assert_eq!(session.blocks[0].trials.len(), 56);
        for (i, expected) in [(1, 28), (2, 8), (3, 28), (4, 8), (5, 28), (6, 8)] {
            assert_eq!(session.blocks[i].trials.len(), expected, "block {i}");
        }
        session.check_structure().unwrap();
    }

    #[test]
    fn calibration_is_singles_only_and_hp_has_all_kinds() {
        let session = generate_session(&SimulatorConfig::default(), "S01").unwrap();
        for trial in &session.blocks[0].trials {
            for window in &trial.windows {
                assert_ne!(window.label.kind(), LabelKind::Double);
            }
        }
        let hp = &session.blocks[1];
        let kinds: std::collections::HashSet<LabelKind> = hp
            .trials
            .iter()
            .flat_map(|t| t.windows.iter().map(|w| w.label.kind()))
            .collect();
        assert!(kinds.contains(&LabelKind::Double));
        assert!(kinds.contains(&LabelKind::SingleDirection));
        assert!(kinds.contains(&LabelKind::SingleModifier));
        assert!(kinds.contains(&LabelKind::Rest), "pulse gaps contribute rest");
        // SP blocks are doubles only.
        for trial in &session.blocks[2].trials {
            for window in &trial.windows {
                assert_eq!(window.label.kind(), LabelKind::Double);
            }
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let config = SimulatorConfig::default();
        let a = generate_session(&config, "S01").unwrap();
        let b = generate_session(&config, "S01").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cohort_has_distinct_reproducible_subjects() {
        let config = SimulatorConfig::default();
        let cohort = generate_cohort(&config, 3).unwrap();
        assert_eq!(cohort.len(), 3);
        let ids: Vec<&str> = cohort.iter().map(|s| s.subject_id.as_str()).collect();
        assert_eq!(ids, ["S01", "S02", "S03"]);
        assert_ne!(cohort[0].blocks, cohort[1].blocks);

        let again = generate_cohort(&config, 3).unwrap();
        assert_eq!(cohort, again);

        // A single-subject cohort matches generate_session at the derived seed.
        let one = generate_cohort(&config, 1).unwrap();
        let mut derived = config.clone();
        derived.seed = derive_seed(config.seed, &[0x50b, 0]);
        assert_eq!(one[0], generate_session(&derived, "S01").unwrap());
    }

    #[test]
    fn blend_assumption_exact_at_zero_interaction() {
        // With double_interaction = 0, the mean feature vector of a double
        // class approaches the mean of its component classes' features.
        let config = SimulatorConfig {
            double_interaction: 0.0,
            ..SimulatorConfig::default()
        };
        let mut rng = rng_from_seed(99);
        let profiles = SubjectProfiles::draw(&config, &mut rng);
        let tones = tone_table(&config);

        let up = GestureLabel::new(Direction::Up, Modifier::NoMod);
        let pinch = GestureLabel::new(Direction::NoDir, Modifier::Pinch);
        let combo = GestureLabel::new(Direction::Up, Modifier::Pinch);

        let mean_features = |label: GestureLabel, rng: &mut ChaCha12Rng| -> Vec<f64> {
            let amps = profiles.amplitudes(label, 0.0, config.channels);
            let mut sums = vec![0.0; 16];
            let trials = 160;
            let mut count = 0.0;
            for _ in 0..trials {
                let signal = synth_segment(&amps, config.pulse_secs, &tones, &config, rng);
                for w in
                    sliding_windows(&signal, config.sample_rate, config.window_ms, config.step_ms)
                        .unwrap()
                {
                    let f = featurize_window(&w).unwrap();
                    for (s, v) in sums.iter_mut().zip(f.as_slice()) {
                        *s += v;
                    }
                    count += 1.0;
                }
            }
            sums.into_iter().map(|s| s / count).collect()
        };

        let f_up = mean_features(up, &mut rng);
        let f_pinch = mean_features(pinch, &mut rng);
        let f_combo = mean_features(combo, &mut rng);

        // RMS features: the double's mean tracks the component mean within
        // a few percent of the signal scale.
        for c in 0..8 {
            let blended = (f_up[c] + f_pinch[c]) / 2.0;
            assert!(
                (f_combo[c] - blended).abs() < 0.05,
                "channel {c}: combo {} vs blended {}",
                f_combo[c],
                blended
            );
        }
        // MPF features: all active classes share the band, so the double's
        // median frequency matches the blend within a couple of bins.
        let bin = config.sample_rate / 481.0;
        for c in 8..16 {
            let blended = (f_up[c] + f_pinch[c]) / 2.0;
            assert!(
                (f_combo[c] - blended).abs() < 2.5 * bin,
                "mpf {c}: combo {} vs blended {}",
                f_combo[c],
                blended
            );
        }
    }

    #[test]
    fn rest_windows_look_like_noise() {
        let session = generate_session(&SimulatorConfig::default(), "S01").unwrap();
        let rest_feature = session.blocks[0]
            .trials
            .iter()
            .flat_map(|t| &t.windows)
            .find(|w| w.label == GestureLabel::REST)
            .unwrap();
        for &v in rest_feature.features.rms() {
            assert!(v < 0.1, "rest rms {v} should be near the noise floor");
        }
        for &v in rest_feature.features.mpf() {
            assert!(v > 300.0, "rest mpf {v} should sit in the flat-noise band");
        }
    }

    #[test]
    fn retain_raw_keeps_windows() {
        let config = SimulatorConfig {
            retain_raw: true,
            ..SimulatorConfig::default()
        };
        let session = generate_session(&config, "S01").unwrap();
        let window = &session.blocks[0].trials[0].windows[0];
        let raw = window.raw.as_ref().expect("raw retained");
        assert_eq!(raw.channel_count(), 8);
        assert_eq!(featurize_window(raw).unwrap(), window.features);
    }
}
