use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::parse::Dataset;
use crate::resolve::{aggregate, AggregateConfig, Strategy};
use crate::scheme::Scheme;
use crate::strength::{class_strength_profile, ClassStrengthProfile, StrengthAggregate};
use crate::vote::{classify_scenario_with, ScenarioTag};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Share {
    pub count: usize,
    pub percent: f64,
}

impl Share {
    fn of(count: usize, total: usize) -> Self {
        let percent = if total == 0 {
            0.0
        } else {
            100.0 * count as f64 / total as f64
        };
        Self { count, percent }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassShare {
    pub label: u8,
    pub name: String,
    pub count: usize,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub source: String,
    pub content_hash: String,
    pub scheme: Scheme,
    pub strategy: Strategy,
    pub n_items: usize,
    pub n_records: usize,
    pub agreement: Share,
    pub clear_majority: Share,
    pub no_clear_majority: Share,
    /// Share of items without a clear majority.
    pub disagreement_rate: f64,
    pub class_distribution: Vec<ClassShare>,
    /// Items the strategy could not label (simple/weighted on ties).
    pub unresolved: Vec<String>,
    /// Annotators per item -> number of items.
    pub annotator_histogram: BTreeMap<usize, usize>,
    /// Items whose every record carries a strength.
    pub strength_items: usize,
    pub strength_profile: Option<ClassStrengthProfile>,
}

pub fn stats_report(
    ds: &Dataset,
    scheme: Scheme,
    strategy: Strategy,
    cfg: &AggregateConfig,
) -> Result<StatsReport> {
    let n = ds.len();
    let mut scenario_counts: BTreeMap<ScenarioTag, usize> = BTreeMap::new();
    let mut class_counts = vec![0usize; scheme.num_classes()];
    let mut annotator_histogram = BTreeMap::new();
    let mut unresolved = Vec::new();
    let mut outcomes = Vec::new();
    let mut strengths = Vec::new();

    for item in &ds.items {
        let tag = classify_scenario_with(item, scheme, cfg.counting)?;
        *scenario_counts.entry(tag).or_default() += 1;
        *annotator_histogram
            .entry(item.num_annotators())
            .or_default() += 1;
        match aggregate(item, scheme, strategy, cfg) {
            Ok(out) => {
                class_counts[out.label.index()] += 1;
                if let Ok(s) = StrengthAggregate::from_item(item, 0.5) {
                    strengths.push(s);
                    outcomes.push(out);
                }
            }
            Err(Error::Unresolvable { item_id, .. }) => unresolved.push(item_id),
            Err(e) => return Err(e),
        }
    }
    let strength_items = ds
        .items
        .iter()
        .filter(|i| i.records().iter().all(|r| r.strength.is_some()))
        .count();
    let strength_profile = if outcomes.is_empty() {
        None
    } else {
        Some(class_strength_profile(&outcomes, &strengths, scheme)?)
    };
    let resolved: usize = class_counts.iter().sum();
    let share = |t: ScenarioTag| Share::of(scenario_counts.get(&t).copied().unwrap_or(0), n);
    let no_clear = share(ScenarioTag::NoClearMajority);

    Ok(StatsReport {
        source: ds.provenance.source.clone(),
        content_hash: ds.provenance.content_hash.clone(),
        scheme,
        strategy,
        n_items: n,
        n_records: ds.items.iter().map(|i| i.num_annotators()).sum(),
        agreement: share(ScenarioTag::Agreement),
        clear_majority: share(ScenarioTag::ClearMajority),
        no_clear_majority: no_clear,
        disagreement_rate: no_clear.percent,
        class_distribution: scheme
            .labels()
            .map(|l| {
                let s = Share::of(class_counts[l.index()], resolved);
                ClassShare {
                    label: l.0,
                    name: scheme.class_name(l).to_string(),
                    count: s.count,
                    percent: s.percent,
                }
            })
            .collect(),
        unresolved,
        annotator_histogram,
        strength_items,
        strength_profile,
    })
}

impl StatsReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "source:   {} (sha256 {})",
            self.source, self.content_hash
        );
        let _ = writeln!(
            out,
            "scheme:   {}   strategy: {}",
            self.scheme, self.strategy
        );
        let _ = writeln!(
            out,
            "items:    {}   records: {}",
            self.n_items, self.n_records
        );
        let _ = writeln!(out);
        let _ = writeln!(out, "scenario              count  percent");
        for (name, s) in [
            ("agreement", self.agreement),
            ("clear majority", self.clear_majority),
            ("no clear majority", self.no_clear_majority),
        ] {
            let _ = writeln!(out, "{name:<20} {:>6} {:>7.2}%", s.count, s.percent);
        }
        let _ = writeln!(out, "disagreement rate: {:.2}%", self.disagreement_rate);
        let _ = writeln!(out);
        let _ = writeln!(out, "class distribution ({}):", self.strategy);
        for c in &self.class_distribution {
            let _ = writeln!(
                out,
                "  {:<2} {:<28} {:>6} {:>7.2}%",
                c.label, c.name, c.count, c.percent
            );
        }
        if !self.unresolved.is_empty() {
            let _ = writeln!(out, "  unresolved: {}", self.unresolved.len());
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "annotators per item:");
        for (k, v) in &self.annotator_histogram {
            let _ = writeln!(out, "  {k:>3}: {v}");
        }
        if let Some(p) = &self.strength_profile {
            let _ = writeln!(out);
            out.push_str(&p.render());
        }
        out
    }
}
