//! Vote tallies, majority sets and agreement scenarios.
//!
//! Plain tallies count label incidences; weighted tallies split each
//! annotator's unit vote evenly over the labels they selected. Masses are
//! exact rationals so ties in the argmax are detected exactly.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::annotation::ItemAnnotations;
use crate::error::{Error, Result};
use crate::scheme::{reduce_unchecked, ClassLabel, Scheme};

pub type Mass = Ratio<u64>;

/// How reduced labels are counted when one annotator selects several base
/// labels that merge into the same reduced class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Counting {
    /// Every (annotator, base label) incidence counts, so {2,3} gives the
    /// four-class label 2 a count of 2.
    #[default]
    Incidence,
    /// Each annotator's reduced labels form a set before counting.
    Deduped,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteTally {
    pub scheme: Scheme,
    pub weighted: bool,
    mass: Vec<Mass>,
}

impl VoteTally {
    /// Builds a tally from explicit masses, one per scheme label.
    pub fn from_masses(scheme: Scheme, weighted: bool, mass: Vec<Mass>) -> Result<Self> {
        if mass.len() != scheme.num_classes() {
            return Err(Error::Contract(format!(
                "{} masses given for the {scheme} scheme",
                mass.len()
            )));
        }
        Ok(Self {
            scheme,
            weighted,
            mass,
        })
    }

    pub fn mass(&self, label: ClassLabel) -> Mass {
        self.mass
            .get(label.index())
            .copied()
            .unwrap_or_else(Mass::zero)
    }

    pub fn masses(&self) -> &[Mass] {
        &self.mass
    }

    pub fn total(&self) -> Mass {
        self.mass.iter().fold(Mass::zero(), |acc, m| acc + m)
    }

    /// Labels with non-zero mass.
    pub fn support(&self) -> impl Iterator<Item = (ClassLabel, Mass)> + '_ {
        self.mass
            .iter()
            .enumerate()
            .filter(|(_, m)| !m.is_zero())
            .map(|(i, m)| (ClassLabel(i as u8), *m))
    }
}

/// Reduced labels of one annotator, in the order the counting mode sees them.
fn reduced_labels(labels: &[ClassLabel], scheme: Scheme, counting: Counting) -> Vec<ClassLabel> {
    let mut out: Vec<ClassLabel> = labels
        .iter()
        .map(|&l| reduce_unchecked(l, scheme))
        .collect();
    if counting == Counting::Deduped {
        // base labels are sorted and reductions are monotone
        out.dedup();
    }
    out
}

fn accumulate(
    item: &ItemAnnotations,
    scheme: Scheme,
    counting: Counting,
    weighted: bool,
) -> Result<VoteTally> {
    if item.records().is_empty() {
        return Err(Error::EmptyItem {
            item_id: item.item_id.clone(),
        });
    }
    let mut mass = vec![Mass::zero(); scheme.num_classes()];
    for record in item.records() {
        let reduced = reduced_labels(record.labels(), scheme, counting);
        let share = if weighted {
            Mass::new(1, reduced.len() as u64)
        } else {
            Mass::from_integer(1)
        };
        for l in reduced {
            mass[l.index()] += share;
        }
    }
    Ok(VoteTally {
        scheme,
        weighted,
        mass,
    })
}

/// Plain vote counts under `scheme`, counting every incidence.
pub fn tally(item: &ItemAnnotations, scheme: Scheme) -> Result<VoteTally> {
    accumulate(item, scheme, Counting::Incidence, false)
}

/// Weighted vote masses under `scheme`: each annotator contributes exactly 1.
pub fn weighted_tally(item: &ItemAnnotations, scheme: Scheme) -> Result<VoteTally> {
    accumulate(item, scheme, Counting::Incidence, true)
}

pub fn tally_with(
    item: &ItemAnnotations,
    scheme: Scheme,
    counting: Counting,
    weighted: bool,
) -> Result<VoteTally> {
    accumulate(item, scheme, counting, weighted)
}

/// Non-empty, sorted set of labels that attain the maximum mass.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<ClassLabel>", into = "Vec<ClassLabel>")]
pub struct MajoritySet(Vec<ClassLabel>);

impl MajoritySet {
    pub fn new(mut labels: Vec<ClassLabel>) -> Result<Self> {
        labels.sort_unstable();
        labels.dedup();
        if labels.is_empty() {
            return Err(Error::Contract("majority set cannot be empty".into()));
        }
        Ok(Self(labels))
    }

    pub fn labels(&self) -> &[ClassLabel] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_clear(&self) -> bool {
        self.0.len() == 1
    }

    pub fn min(&self) -> ClassLabel {
        self.0[0]
    }

    pub fn max(&self) -> ClassLabel {
        self.0[self.0.len() - 1]
    }

    pub fn contains(&self, label: ClassLabel) -> bool {
        self.0.binary_search(&label).is_ok()
    }
}

impl TryFrom<Vec<ClassLabel>> for MajoritySet {
    type Error = Error;

    fn try_from(v: Vec<ClassLabel>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<MajoritySet> for Vec<ClassLabel> {
    fn from(m: MajoritySet) -> Self {
        m.0
    }
}

/// Exact argmax set of a tally.
pub fn majority_set(t: &VoteTally) -> Result<MajoritySet> {
    let max = t.mass.iter().max().copied().unwrap_or_else(Mass::zero);
    if max.is_zero() {
        return Err(Error::DegenerateTally);
    }
    let labels = t
        .mass
        .iter()
        .enumerate()
        .filter(|(_, m)| **m == max)
        .map(|(i, _)| ClassLabel(i as u8))
        .collect();
    Ok(MajoritySet(labels))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioTag {
    Agreement,
    ClearMajority,
    NoClearMajority,
}

impl ScenarioTag {
    pub const ALL: [ScenarioTag; 3] = [
        ScenarioTag::Agreement,
        ScenarioTag::ClearMajority,
        ScenarioTag::NoClearMajority,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioTag::Agreement => "agreement",
            ScenarioTag::ClearMajority => "clear_majority",
            ScenarioTag::NoClearMajority => "no_clear_majority",
        }
    }
}

impl fmt::Display for ScenarioTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::Contract(format!("unknown scenario {s:?}")))
    }
}

/// True when every annotator picked one reduced class and all picked the
/// same one.
pub fn is_agreement(item: &ItemAnnotations, scheme: Scheme) -> bool {
    let mut common = None;
    for record in item.records() {
        let reduced = reduced_labels(record.labels(), scheme, Counting::Deduped);
        if reduced.len() != 1 {
            return false;
        }
        match common {
            None => common = Some(reduced[0]),
            Some(c) if c != reduced[0] => return false,
            Some(_) => {}
        }
    }
    common.is_some()
}

/// Strongest applicable scenario for the item, computed from plain counts.
pub fn classify_scenario(item: &ItemAnnotations, scheme: Scheme) -> Result<ScenarioTag> {
    classify_scenario_with(item, scheme, Counting::Incidence)
}

pub fn classify_scenario_with(
    item: &ItemAnnotations,
    scheme: Scheme,
    counting: Counting,
) -> Result<ScenarioTag> {
    let t = tally_with(item, scheme, counting, false)?;
    if is_agreement(item, scheme) {
        return Ok(ScenarioTag::Agreement);
    }
    Ok(if majority_set(&t)?.is_clear() {
        ScenarioTag::ClearMajority
    } else {
        ScenarioTag::NoClearMajority
    })
}
