//! Structured gesture labels: a direction component crossed with a modifier
//! component, spanning a 15-class vocabulary.
//!
//! The canonical order is direction-major with directions Up, Down, Left,
//! Right, NoDir and modifiers Pinch, Thumb, NoMod, giving every label a
//! stable index used for confusion matrices and heatmap axes.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Wrist-direction component of a gesture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
    /// No direction gesture active.
    NoDir,
}

impl Direction {
    /// All values in canonical order.
    pub const ALL: [Direction; 5] = [
        Direction::Up,
        Direction::Down,
        Direction::Left,
        Direction::Right,
        Direction::NoDir,
    ];

    /// The four active directions (everything except `NoDir`).
    pub const ACTIVE: [Direction; 4] = [
        Direction::Up,
        Direction::Down,
        Direction::Left,
        Direction::Right,
    ];

    /// Canonical index in `ALL`.
    pub fn index(self) -> usize {
        match self {
            Direction::Up => 0,
            Direction::Down => 1,
            Direction::Left => 2,
            Direction::Right => 3,
            Direction::NoDir => 4,
        }
    }

    /// Whether a direction gesture is active.
    pub fn is_active(self) -> bool {
        self != Direction::NoDir
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::Up => "Up",
            Direction::Down => "Down",
            Direction::Left => "Left",
            Direction::Right => "Right",
            Direction::NoDir => "NoDir",
        }
    }
}

/// Finger-modifier component of a gesture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Modifier {
    Pinch,
    Thumb,
    /// No modifier gesture active.
    NoMod,
}

impl Modifier {
    /// All values in canonical order.
    pub const ALL: [Modifier; 3] = [Modifier::Pinch, Modifier::Thumb, Modifier::NoMod];

    /// The two active modifiers.
    pub const ACTIVE: [Modifier; 2] = [Modifier::Pinch, Modifier::Thumb];

    /// Canonical index in `ALL`.
    pub fn index(self) -> usize {
        match self {
            Modifier::Pinch => 0,
            Modifier::Thumb => 1,
            Modifier::NoMod => 2,
        }
    }

    /// Whether a modifier gesture is active.
    pub fn is_active(self) -> bool {
        self != Modifier::NoMod
    }

    pub fn name(self) -> &'static str {
        match self {
            Modifier::Pinch => "Pinch",
            Modifier::Thumb => "Thumb",
            Modifier::NoMod => "NoMod",
        }
    }
}

/// A structured gesture label: one direction and one modifier component.
///
/// `(NoDir, NoMod)` is the unique rest label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GestureLabel {
    pub direction: Direction,
    pub modifier: Modifier,
}

/// Number of classes in the full label vocabulary.
pub const CLASS_COUNT: usize = 15;

/// Number of combination (double) classes.
pub const DOUBLE_CLASS_COUNT: usize = 8;

/// Coarse category of a label, used to split accuracy reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LabelKind {
    SingleDirection,
    SingleModifier,
    Double,
    Rest,
}

impl GestureLabel {
    pub fn new(direction: Direction, modifier: Modifier) -> Self {
        Self { direction, modifier }
    }

    /// The rest label `(NoDir, NoMod)`.
    pub const REST: GestureLabel = GestureLabel {
        direction: Direction::NoDir,
        modifier: Modifier::NoMod,
    };

    /// Canonical class index: direction-major over the 5x3 product space.
    pub fn class_index(self) -> usize {
        self.direction.index() * Modifier::ALL.len() + self.modifier.index()
    }

    /// Inverse of [`GestureLabel::class_index`].
    pub fn from_class_index(index: usize) -> Result<Self> {
        if index >= CLASS_COUNT {
            return Err(Error::InvalidInput(format!(
                "class index {index} out of range 0..{CLASS_COUNT}"
            )));
        }
        Ok(Self {
            direction: Direction::ALL[index / Modifier::ALL.len()],
            modifier: Modifier::ALL[index % Modifier::ALL.len()],
        })
    }

    /// Category of this label (single direction, single modifier, double, rest).
    pub fn kind(self) -> LabelKind {
        match (self.direction.is_active(), self.modifier.is_active()) {
            (true, true) => LabelKind::Double,
            (true, false) => LabelKind::SingleDirection,
            (false, true) => LabelKind::SingleModifier,
            (false, false) => LabelKind::Rest,
        }
    }

    pub fn is_double(self) -> bool {
        self.kind() == LabelKind::Double
    }
}

impl fmt::Display for GestureLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.direction.name(), self.modifier.name())
    }
}

impl FromStr for GestureLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (d, m) = s
            .split_once(',')
            .ok_or_else(|| Error::InvalidInput(format!("label {s:?} is not of the form D,M")))?;
        let direction = Direction::ALL
            .iter()
            .copied()
            .find(|v| v.name() == d)
            .ok_or_else(|| Error::InvalidInput(format!("unknown direction {d:?}")))?;
        let modifier = Modifier::ALL
            .iter()
            .copied()
            .find(|v| v.name() == m)
            .ok_or_else(|| Error::InvalidInput(format!("unknown modifier {m:?}")))?;
        Ok(GestureLabel::new(direction, modifier))
    }
}

/// All 15 labels in canonical order. Deterministic and stable across runs.
pub fn enumerate_classes() -> Vec<GestureLabel> {
    let mut out = Vec::with_capacity(CLASS_COUNT);
    for direction in Direction::ALL {
        for modifier in Modifier::ALL {
            out.push(GestureLabel::new(direction, modifier));
        }
    }
    out
}

/// The 8 combination classes in canonical order.
pub fn enumerate_double_classes() -> Vec<GestureLabel> {
    enumerate_classes()
        .into_iter()
        .filter(|label| label.is_double())
        .collect()
}

/// The 7 classes available from single-gesture calibration (4 directions,
/// 2 modifiers, rest) in canonical order.
pub fn enumerate_single_classes() -> Vec<GestureLabel> {
    enumerate_classes()
        .into_iter()
        .filter(|label| !label.is_double())
        .collect()
}

/// Categorize a label. Mirrors [`GestureLabel::kind`] as a free function.
pub fn label_kind(label: GestureLabel) -> LabelKind {
    label.kind()
}
