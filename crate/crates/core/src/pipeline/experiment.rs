//! Training/validation/test materialization for the five experiment setups.
//!
//! * E1: agreement items only.
//! * E2: agreement plus clear-majority items (plain or weighted tallies).
//! * E3: every item, labelled by a tie-breaking strategy.
//! * E4: every item with a lenient (min) and a sensitive (max) label.
//! * E5: mean strengths and their binarization, optionally restricted to
//!   items whose annotators agree on hate vs. no hate.
//!
//! Test items always yield Gold (agreement) and Silver (agreement + clear
//! majority) sets.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::annotation::ItemAnnotations;
use crate::error::{Error, Result};
use crate::pipeline::parse::Dataset;
use crate::pipeline::split::{split, Split, SplitSpec};
use crate::resolve::{aggregate, AggregateConfig, AggregationOutcome, BaseStrategy, Strategy};
use crate::scheme::{ClassLabel, Scheme};
use crate::strength::{strength_agreement_subset, StrengthAggregate, DEFAULT_BINARIZE_THRESHOLD};
use crate::vote::ScenarioTag;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExperimentId {
    E1,
    E2,
    E3,
    E4,
    E5,
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "E1" => Ok(ExperimentId::E1),
            "E2" => Ok(ExperimentId::E2),
            "E3" => Ok(ExperimentId::E3),
            "E4" => Ok(ExperimentId::E4),
            "E5" => Ok(ExperimentId::E5),
            _ => Err(Error::Config(format!(
                "unknown experiment {s:?} (expected E1..E5)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrengthSubset {
    #[default]
    All,
    /// Items whose annotators agree on zero vs. positive strength.
    Agreements,
}

impl FromStr for StrengthSubset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(StrengthSubset::All),
            "agreements" => Ok(StrengthSubset::Agreements),
            _ => Err(Error::Config(format!(
                "unknown subset {s:?} (expected all or agreements)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrengthOptions {
    pub threshold: f64,
    pub train_subset: StrengthSubset,
    pub test_subset: StrengthSubset,
}

impl Default for StrengthOptions {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_BINARIZE_THRESHOLD,
            train_subset: StrengthSubset::All,
            test_subset: StrengthSubset::All,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub id: ExperimentId,
    pub scheme: Scheme,
    /// E2: simple or weighted. E3: any strategy. E1/E5: none.
    pub strategy: Option<Strategy>,
    /// E4: use wmin/wmax instead of min/max.
    #[serde(default)]
    pub weighted: bool,
    #[serde(default)]
    pub strength: StrengthOptions,
}

impl ExperimentSpec {
    pub fn new(id: ExperimentId, scheme: Scheme) -> Self {
        Self {
            id,
            scheme,
            strategy: None,
            weighted: false,
            strength: StrengthOptions::default(),
        }
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = Some(strategy);
        self
    }

    /// The strategy used to label training items, after defaults.
    pub fn training_strategy(&self) -> Result<Option<Strategy>> {
        let bad = |why: &str| Err(Error::Config(format!("{}: {why}", self.id)));
        match (self.id, self.strategy) {
            (ExperimentId::E1, None) => Ok(Some(Strategy::SIMPLE)),
            (ExperimentId::E1, Some(s)) => bad(&format!("takes no strategy (got {s})")),
            (ExperimentId::E2, None) => Ok(Some(Strategy::SIMPLE)),
            (ExperimentId::E2, Some(s)) if s.base == BaseStrategy::Simple => Ok(Some(s)),
            (ExperimentId::E2, Some(s)) => {
                bad(&format!("strategy must be simple or weighted (got {s})"))
            }
            (ExperimentId::E3, None) => bad("needs a strategy"),
            (ExperimentId::E3, Some(s)) => Ok(Some(s)),
            (ExperimentId::E4, None) => Ok(None),
            (ExperimentId::E4, Some(s)) => bad(&format!(
                "always uses min/max pairs (got {s}); use the weighted flag"
            )),
            (ExperimentId::E5, None) => Ok(None),
            (ExperimentId::E5, Some(s)) => bad(&format!("takes no strategy (got {s})")),
        }
    }

    pub fn paired_strategies(&self) -> (Strategy, Strategy) {
        if self.weighted {
            (
                Strategy::weighted(BaseStrategy::Min),
                Strategy::weighted(BaseStrategy::Max),
            )
        } else {
            (
                Strategy::plain(BaseStrategy::Min),
                Strategy::plain(BaseStrategy::Max),
            )
        }
    }
}

/// E4 row: one item with both the lenient and the sensitive label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairedRow {
    pub item_id: String,
    pub scheme: Scheme,
    pub scenario: ScenarioTag,
    pub lenient_strategy: Strategy,
    pub lenient: ClassLabel,
    pub sensitive_strategy: Strategy,
    pub sensitive: ClassLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TrainRows {
    Labeled(Vec<AggregationOutcome>),
    Paired(Vec<PairedRow>),
    Strength(Vec<StrengthAggregate>),
}

impl TrainRows {
    pub fn len(&self) -> usize {
        match self {
            TrainRows::Labeled(v) => v.len(),
            TrainRows::Paired(v) => v.len(),
            TrainRows::Strength(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn item_ids(&self) -> Vec<&str> {
        match self {
            TrainRows::Labeled(v) => v.iter().map(|r| r.item_id.as_str()).collect(),
            TrainRows::Paired(v) => v.iter().map(|r| r.item_id.as_str()).collect(),
            TrainRows::Strength(v) => v.iter().map(|r| r.item_id.as_str()).collect(),
        }
    }

    pub fn to_jsonl(&self) -> Vec<u8> {
        match self {
            TrainRows::Labeled(v) => crate::pipeline::output::jsonl(v),
            TrainRows::Paired(v) => crate::pipeline::output::jsonl(v),
            TrainRows::Strength(v) => crate::pipeline::output::jsonl(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestSets {
    pub gold: Vec<AggregationOutcome>,
    pub silver: Vec<AggregationOutcome>,
    /// No-clear-majority items, kept out of both sets.
    pub excluded: Vec<String>,
}

/// Gold = agreement items; Silver = Gold plus clear-majority items labelled
/// by plain majority vote.
pub fn build_test_sets(
    test_items: &[&ItemAnnotations],
    scheme: Scheme,
    cfg: &AggregateConfig,
) -> Result<TestSets> {
    let mut sets = TestSets {
        gold: Vec::new(),
        silver: Vec::new(),
        excluded: Vec::new(),
    };
    for item in test_items {
        match aggregate(item, scheme, Strategy::SIMPLE, cfg) {
            Ok(out) => {
                if out.scenario == ScenarioTag::Agreement {
                    sets.gold.push(out.clone());
                }
                sets.silver.push(out);
            }
            Err(Error::Unresolvable { item_id, .. }) => sets.excluded.push(item_id),
            Err(e) => return Err(e),
        }
    }
    Ok(sets)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub experiment: ExperimentId,
    pub scheme: Scheme,
    pub strategy: Option<Strategy>,
    pub paired: Option<(Strategy, Strategy)>,
    pub strength: Option<StrengthOptions>,
    pub aggregate: AggregateConfig,
    pub split: SplitSpec,
    pub source: String,
    pub content_hash: String,
    pub counts: BuildCounts,
    /// Train-pool items the experiment's filter dropped.
    pub dropped_train: Vec<String>,
    pub dropped_validation: Vec<String>,
    pub excluded_test: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildCounts {
    pub train: usize,
    pub validation: usize,
    pub test_gold: usize,
    pub test_silver: usize,
    pub test_strength: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentBuild {
    pub manifest: ExperimentManifest,
    pub split: Split,
    pub train: TrainRows,
    pub validation: TrainRows,
    pub test: TestSets,
    /// E5 only: strength targets for the test split.
    pub test_strength: Option<Vec<StrengthAggregate>>,
}

fn lookup<'a>(
    index: &HashMap<&str, &'a ItemAnnotations>,
    ids: &[String],
) -> Vec<&'a ItemAnnotations> {
    ids.iter().map(|id| index[id.as_str()]).collect()
}

fn label_rows(
    items: &[&ItemAnnotations],
    spec: &ExperimentSpec,
    cfg: &AggregateConfig,
) -> Result<(TrainRows, Vec<String>)> {
    let mut dropped = Vec::new();
    match spec.id {
        ExperimentId::E1 | ExperimentId::E2 | ExperimentId::E3 => {
            let strategy = spec.training_strategy()?.expect("labelled experiment");
            let mut rows = Vec::new();
            for item in items {
                match aggregate(item, spec.scheme, strategy, cfg) {
                    Ok(out)
                        if spec.id == ExperimentId::E1
                            && out.scenario != ScenarioTag::Agreement =>
                    {
                        dropped.push(out.item_id)
                    }
                    Ok(out) => rows.push(out),
                    Err(Error::Unresolvable { item_id, .. }) => dropped.push(item_id),
                    Err(e) => return Err(e),
                }
            }
            Ok((TrainRows::Labeled(rows), dropped))
        }
        ExperimentId::E4 => {
            let (lenient_s, sensitive_s) = spec.paired_strategies();
            let rows = items
                .iter()
                .map(|item| {
                    let lenient = aggregate(item, spec.scheme, lenient_s, cfg)?;
                    let sensitive = aggregate(item, spec.scheme, sensitive_s, cfg)?;
                    Ok(PairedRow {
                        item_id: item.item_id.clone(),
                        scheme: spec.scheme,
                        scenario: lenient.scenario,
                        lenient_strategy: lenient_s,
                        lenient: lenient.label,
                        sensitive_strategy: sensitive_s,
                        sensitive: sensitive.label,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((TrainRows::Paired(rows), dropped))
        }
        ExperimentId::E5 => {
            let rows = strength_rows(
                items,
                spec.strength.train_subset,
                spec.strength.threshold,
                &mut dropped,
            )?;
            Ok((TrainRows::Strength(rows), dropped))
        }
    }
}

fn strength_rows(
    items: &[&ItemAnnotations],
    subset: StrengthSubset,
    threshold: f64,
    dropped: &mut Vec<String>,
) -> Result<Vec<StrengthAggregate>> {
    let owned: Vec<ItemAnnotations> = items.iter().map(|i| (*i).clone()).collect();
    let kept = match subset {
        StrengthSubset::All => owned,
        StrengthSubset::Agreements => {
            let kept = strength_agreement_subset(&owned)?;
            let keep_ids: std::collections::HashSet<&str> =
                kept.iter().map(|i| i.item_id.as_str()).collect();
            dropped.extend(
                owned
                    .iter()
                    .filter(|i| !keep_ids.contains(i.item_id.as_str()))
                    .map(|i| i.item_id.clone()),
            );
            kept
        }
    };
    kept.iter()
        .map(|i| StrengthAggregate::from_item(i, threshold))
        .collect()
}

/// Splits the dataset and materializes one experiment.
pub fn build_experiment(
    ds: &Dataset,
    spec: &ExperimentSpec,
    split_spec: &SplitSpec,
    cfg: &AggregateConfig,
) -> Result<ExperimentBuild> {
    let strategy = spec.training_strategy()?;
    let parts = split(ds, split_spec)?;
    let index = ds.index();

    let (train, dropped_train) = label_rows(&lookup(&index, &parts.train), spec, cfg)?;
    let (validation, dropped_validation) =
        label_rows(&lookup(&index, &parts.validation), spec, cfg)?;
    let test_items = lookup(&index, &parts.test);
    let test = build_test_sets(&test_items, spec.scheme, cfg)?;
    let test_strength = if spec.id == ExperimentId::E5 {
        let mut ignored = Vec::new();
        Some(strength_rows(
            &test_items,
            spec.strength.test_subset,
            spec.strength.threshold,
            &mut ignored,
        )?)
    } else {
        None
    };

    let manifest = ExperimentManifest {
        experiment: spec.id,
        scheme: spec.scheme,
        strategy,
        paired: (spec.id == ExperimentId::E4).then(|| spec.paired_strategies()),
        strength: (spec.id == ExperimentId::E5).then_some(spec.strength),
        aggregate: *cfg,
        split: *split_spec,
        source: ds.provenance.source.clone(),
        content_hash: ds.provenance.content_hash.clone(),
        counts: BuildCounts {
            train: train.len(),
            validation: validation.len(),
            test_gold: test.gold.len(),
            test_silver: test.silver.len(),
            test_strength: test_strength.as_ref().map_or(0, Vec::len),
        },
        dropped_train,
        dropped_validation,
        excluded_test: test.excluded.clone(),
    };
    Ok(ExperimentBuild {
        manifest,
        split: parts,
        train,
        validation,
        test,
        test_strength,
    })
}
