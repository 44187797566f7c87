//! Multi-label gesture recognition from multi-channel sEMG-style signals.
//!
//! The library trains direction and modifier classifiers on single-gesture
//! calibration data, extrapolates to combination gestures with synthetic
//! feature blending, and evaluates the approach on simulated recording
//! sessions with reproducible, seeded experiment sweeps.

pub mod architectures;
pub mod augmentation;

pub mod classifiers;
pub mod dataset;
pub mod error;
pub mod evaluation;

pub mod labels;
pub mod seeds;
pub mod signal;
pub mod similarity;

pub mod simgen;
pub mod stats;
pub mod synthesis;

pub use error::{Error, Result};
pub use labels::{Direction, GestureLabel, LabelKind, Modifier};
pub use signal::{EmgWindow, FeatureVector, FEATURE_DIM};
