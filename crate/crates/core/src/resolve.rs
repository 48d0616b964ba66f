//! Tie-breaking: turning a majority set into one gold label.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::annotation::ItemAnnotations;
use crate::error::{Error, Result};
use crate::scheme::{ClassLabel, Scheme};
use crate::vote::{
    classify_scenario_with, majority_set, tally_with, Counting, MajoritySet, ScenarioTag,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseStrategy {
    /// Only clear majorities resolve; ties are an error.
    Simple,
    Min,
    Max,
    Mean,
    Random,
}

/// A tie-breaking rule over either the plain or the weighted majority set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Strategy {
    pub base: BaseStrategy,
    pub weighted: bool,
}

impl Strategy {
    pub const SIMPLE: Strategy = Strategy::plain(BaseStrategy::Simple);
    pub const WEIGHTED: Strategy = Strategy::weighted(BaseStrategy::Simple);

    /// Every strategy, in the order the CLI documents them.
    pub const ALL: [Strategy; 10] = [
        Strategy::plain(BaseStrategy::Simple),
        Strategy::weighted(BaseStrategy::Simple),
        Strategy::plain(BaseStrategy::Min),
        Strategy::weighted(BaseStrategy::Min),
        Strategy::plain(BaseStrategy::Max),
        Strategy::weighted(BaseStrategy::Max),
        Strategy::plain(BaseStrategy::Mean),
        Strategy::weighted(BaseStrategy::Mean),
        Strategy::plain(BaseStrategy::Random),
        Strategy::weighted(BaseStrategy::Random),
    ];

    pub const fn plain(base: BaseStrategy) -> Self {
        Self {
            base,
            weighted: false,
        }
    }

    pub const fn weighted(base: BaseStrategy) -> Self {
        Self {
            base,
            weighted: true,
        }
    }

    pub fn name(self) -> &'static str {
        match (self.base, self.weighted) {
            (BaseStrategy::Simple, false) => "simple",
            (BaseStrategy::Simple, true) => "weighted",
            (BaseStrategy::Min, false) => "min",
            (BaseStrategy::Min, true) => "wmin",
            (BaseStrategy::Max, false) => "max",
            (BaseStrategy::Max, true) => "wmax",
            (BaseStrategy::Mean, false) => "mean",
            (BaseStrategy::Mean, true) => "wmean",
            (BaseStrategy::Random, false) => "random",
            (BaseStrategy::Random, true) => "wrandom",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Strategy::ALL.iter().map(|s| s.name()).collect();
                Error::Config(format!(
                    "unknown strategy {s:?} (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

impl Serialize for Strategy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Strategy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Tie rule for rounding an exact .5 mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Rounding {
    /// Half away from zero, i.e. toward the more severe class.
    #[default]
    #[serde(rename = "half-up")]
    HalfUp,
    #[serde(rename = "half-even")]
    HalfEven,
}

impl Rounding {
    pub fn name(self) -> &'static str {
        match self {
            Rounding::HalfUp => "half-up",
            Rounding::HalfEven => "half-even",
        }
    }

    pub fn round(self, x: Ratio<u64>) -> u64 {
        let floor = x.to_integer();
        let frac = x - Ratio::from_integer(floor);
        let half = Ratio::new(1, 2);
        if frac > half {
            floor + 1
        } else if frac < half {
            floor
        } else {
            match self {
                Rounding::HalfUp => floor + 1,
                Rounding::HalfEven if floor.is_multiple_of(2) => floor,
                Rounding::HalfEven => floor + 1,
            }
        }
    }
}

impl FromStr for Rounding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "half-up" => Ok(Rounding::HalfUp),
            "half-even" => Ok(Rounding::HalfEven),
            other => Err(Error::Config(format!(
                "unknown rounding mode {other:?} (expected half-up or half-even)"
            ))),
        }
    }
}

pub fn resolve_min(m: &MajoritySet) -> ClassLabel {
    m.min()
}

pub fn resolve_max(m: &MajoritySet) -> ClassLabel {
    m.max()
}

/// Rounded arithmetic mean of the set. The result need not be a member.
pub fn resolve_mean(m: &MajoritySet, rounding: Rounding) -> ClassLabel {
    let sum: u64 = m.labels().iter().map(|l| l.0 as u64).sum();
    let mean = Ratio::new(sum, m.len() as u64);
    ClassLabel(rounding.round(mean) as u8)
}

fn item_rng(seed: u64, item_id: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(b"agree-kit/random/v1\0");
    h.update(seed.to_le_bytes());
    h.update(item_id.as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Uniform draw from the set. The stream depends only on `(seed, item_id)`,
/// so results do not depend on processing order.
pub fn resolve_random(m: &MajoritySet, seed: u64, item_id: &str) -> ClassLabel {
    if m.is_clear() {
        return m.min();
    }
    let idx = item_rng(seed, item_id).gen_range(0..m.len());
    m.labels()[idx]
}

/// Knobs that affect aggregation results; all of them are echoed in run
/// manifests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AggregateConfig {
    pub counting: Counting,
    pub rounding: Rounding,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregationOutcome {
    pub item_id: String,
    pub scheme: Scheme,
    pub strategy: Strategy,
    pub scenario: ScenarioTag,
    pub majority: MajoritySet,
    pub label: ClassLabel,
}

/// Majority set under `strategy.weighted`, resolved by the base rule. The
/// scenario always comes from the plain tally.
pub fn aggregate(
    item: &ItemAnnotations,
    scheme: Scheme,
    strategy: Strategy,
    cfg: &AggregateConfig,
) -> Result<AggregationOutcome> {
    if strategy.base == BaseStrategy::Random && cfg.seed.is_none() {
        return Err(Error::Config(format!(
            "strategy {strategy} needs an explicit seed"
        )));
    }
    let scenario = classify_scenario_with(item, scheme, cfg.counting)?;
    let majority = majority_set(&tally_with(item, scheme, cfg.counting, strategy.weighted)?)?;
    let label = match strategy.base {
        BaseStrategy::Simple => {
            if !majority.is_clear() {
                return Err(Error::Unresolvable {
                    item_id: item.item_id.clone(),
                    n: majority.len(),
                });
            }
            majority.min()
        }
        BaseStrategy::Min => resolve_min(&majority),
        BaseStrategy::Max => resolve_max(&majority),
        BaseStrategy::Mean => resolve_mean(&majority, cfg.rounding),
        BaseStrategy::Random => {
            resolve_random(&majority, cfg.seed.unwrap_or_default(), &item.item_id)
        }
    };
    Ok(AggregationOutcome {
        item_id: item.item_id.clone(),
        scheme,
        strategy,
        scenario,
        majority,
        label,
    })
}
