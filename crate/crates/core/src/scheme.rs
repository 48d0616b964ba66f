//! Label universes and the reductions from the six-class base scheme.
//!
//! Base categories, by index:
//!
//! | index | category                              |
//! |-------|---------------------------------------|
//! | 0     | no hate speech                        |
//! | 1     | exclusion / discriminatory discourse  |
//! | 2     | symbolization                         |
//! | 3     | exaggeration / generalization         |
//! | 4     | swearing                              |
//! | 5     | threat of violence                    |
//!
//! The four-class scheme merges {2,3} and {4,5}; the two-class scheme is
//! hate vs. no hate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A class index, interpreted under some [`Scheme`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassLabel(pub u8);

impl ClassLabel {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<ClassLabel> for u8 {
    fn from(l: ClassLabel) -> u8 {
        l.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Six,
    Four,
    Two,
}

pub const BASE_CLASSES: u8 = 6;

const R4: [u8; 6] = [0, 1, 2, 2, 3, 3];

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Six, Scheme::Four, Scheme::Two];

    pub fn num_classes(self) -> usize {
        match self {
            Scheme::Six => 6,
            Scheme::Four => 4,
            Scheme::Two => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Six => "six",
            Scheme::Four => "four",
            Scheme::Two => "two",
        }
    }

    pub fn labels(self) -> impl Iterator<Item = ClassLabel> {
        (0..self.num_classes() as u8).map(ClassLabel)
    }

    /// Checks that `label` lies inside this scheme's range.
    pub fn validate(self, label: i64) -> Result<ClassLabel> {
        if (0..self.num_classes() as i64).contains(&label) {
            Ok(ClassLabel(label as u8))
        } else {
            Err(Error::InvalidLabel {
                value: label,
                scheme: self.name(),
            })
        }
    }

    /// Human-readable class name used in text reports.
    pub fn class_name(self, label: ClassLabel) -> &'static str {
        match (self, label.0) {
            (_, 0) => "no hate",
            (Scheme::Six, 1) | (Scheme::Four, 1) => "exclusion/discrimination",
            (Scheme::Six, 2) => "symbolization",
            (Scheme::Six, 3) => "exaggeration/generalization",
            (Scheme::Six, 4) => "swearing",
            (Scheme::Six, 5) => "threat",
            (Scheme::Four, 2) => "symbolization+exaggeration",
            (Scheme::Four, 3) => "swearing+threat",
            (Scheme::Two, 1) => "hate",
            _ => "?",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "6" | "six" => Ok(Scheme::Six),
            "4" | "four" => Ok(Scheme::Four),
            "2" | "two" => Ok(Scheme::Two),
            other => Err(Error::Config(format!(
                "unknown scheme {other:?} (expected 6, 4 or 2)"
            ))),
        }
    }
}

/// Maps a six-class label into `scheme`.
pub fn reduce_label(label: ClassLabel, scheme: Scheme) -> Result<ClassLabel> {
    if label.0 >= BASE_CLASSES {
        return Err(Error::InvalidLabel {
            value: label.0 as i64,
            scheme: Scheme::Six.name(),
        });
    }
    Ok(reduce_unchecked(label, scheme))
}

/// Same as [`reduce_label`] for labels already validated against the base
/// scheme.
pub(crate) fn reduce_unchecked(label: ClassLabel, scheme: Scheme) -> ClassLabel {
    match scheme {
        Scheme::Six => label,
        Scheme::Four => ClassLabel(R4[label.index()]),
        Scheme::Two => ClassLabel(u8::from(label.0 != 0)),
    }
}
