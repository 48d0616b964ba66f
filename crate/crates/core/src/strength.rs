//! Strength (0-10 severity) aggregation, score ensembling and thresholding.

use std::collections::{BTreeMap, HashMap};

use num_rational::Ratio;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::annotation::{ItemAnnotations, MAX_STRENGTH};
use crate::error::{Error, Result};
use crate::resolve::AggregationOutcome;
use crate::scheme::{reduce_unchecked, ClassLabel, Scheme};

pub type Strength = Ratio<u64>;

pub const DEFAULT_BINARIZE_THRESHOLD: f64 = 0.5;
pub const DEFAULT_ALPHA: f64 = 0.93;
const HIST_BINS: usize = MAX_STRENGTH as usize + 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrengthAggregate {
    pub item_id: String,
    #[serde(with = "ratio_serde")]
    pub mean_strength: Strength,
    pub binary_label: u8,
    pub n_annotators: usize,
}

impl StrengthAggregate {
    pub fn from_item(item: &ItemAnnotations, threshold: f64) -> Result<Self> {
        let mean = mean_strength(item)?;
        Ok(Self {
            item_id: item.item_id.clone(),
            mean_strength: mean,
            binary_label: binarize(mean, threshold),
            n_annotators: item.num_annotators(),
        })
    }
}

/// Serializes a rational as `{"num": n, "den": d, "value": f}`.
pub(crate) mod ratio_serde {
    use num_traits::ToPrimitive;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::Strength;

    #[derive(Serialize, Deserialize)]
    struct Repr {
        num: u64,
        den: u64,
        #[serde(default)]
        value: f64,
    }

    pub fn serialize<S: Serializer>(r: &Strength, s: S) -> Result<S::Ok, S::Error> {
        Repr {
            num: *r.numer(),
            den: *r.denom(),
            value: r.to_f64().unwrap_or(f64::NAN),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Strength, D::Error> {
        let r = Repr::deserialize(d)?;
        if r.den == 0 {
            return Err(serde::de::Error::custom("zero denominator"));
        }
        Ok(Strength::new(r.num, r.den))
    }
}

fn strengths(item: &ItemAnnotations) -> Result<Vec<u8>> {
    let missing: Vec<String> = item
        .records()
        .iter()
        .filter(|r| r.strength.is_none())
        .map(|r| r.annotator_id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingStrength {
            item_id: item.item_id.clone(),
            annotators: missing,
        });
    }
    Ok(item.records().iter().filter_map(|r| r.strength).collect())
}

/// Exact mean of the annotators' strengths.
pub fn mean_strength(item: &ItemAnnotations) -> Result<Strength> {
    let s = strengths(item)?;
    let sum: u64 = s.iter().map(|&v| v as u64).sum();
    Ok(Strength::new(sum, s.len() as u64))
}

/// 1 iff `mean > threshold`; a mean equal to the threshold is non-hate.
pub fn binarize(mean: Strength, threshold: f64) -> u8 {
    u8::from(mean.to_f64().unwrap_or(0.0) > threshold)
}

/// Items whose annotators agree on hate vs. no hate when each strength is
/// mapped 0 -> 0 and 1..=10 -> 1.
pub fn strength_agreement_subset(items: &[ItemAnnotations]) -> Result<Vec<ItemAnnotations>> {
    let mut kept = Vec::new();
    for item in items {
        let s = strengths(item)?;
        let first = s[0] > 0;
        if s.iter().all(|&v| (v > 0) == first) {
            kept.push(item.clone());
        }
    }
    Ok(kept)
}

/// Affine normalization bounds, fitted once on a declared split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormBounds {
    pub min: f64,
    pub max: f64,
}

impl NormBounds {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(Error::Contract(format!(
                "degenerate normalization bounds ({min}, {max})"
            )));
        }
        Ok(Self { min, max })
    }

    /// Bounds spanning the given scores.
    pub fn fit(scores: &[f64]) -> Result<Self> {
        let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::new(min, max)
    }

    pub fn apply(&self, score: f64) -> f64 {
        ((score - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
    }
}

pub fn normalize_scores(scores: &[f64], bounds: (f64, f64)) -> Result<Vec<f64>> {
    let b = NormBounds::new(bounds.0, bounds.1)?;
    Ok(scores.iter().map(|&s| b.apply(s)).collect())
}

/// Convex combination `alpha * s_r + (1 - alpha) * s_c` of two normalized
/// scores.
pub fn ensemble_score(s_r: f64, s_c: f64, alpha: f64) -> Result<f64> {
    let unit = 0.0..=1.0;
    if !unit.contains(&alpha) {
        return Err(Error::Contract(format!("alpha {alpha} outside [0,1]")));
    }
    if !unit.contains(&s_r) || !unit.contains(&s_c) {
        return Err(Error::Contract(format!(
            "ensemble inputs must be normalized to [0,1], got ({s_r}, {s_c})"
        )));
    }
    Ok(alpha * s_r + (1.0 - alpha) * s_c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub alpha: f64,
    pub regression_bounds: NormBounds,
    pub classifier_bounds: NormBounds,
    pub decision_threshold: f64,
    /// Which split the bounds and threshold were fitted on.
    pub fitted_on: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdChoice {
    pub threshold: f64,
    pub accuracy: f64,
}

/// Accuracy of predicting `score > threshold` against binary labels.
pub fn threshold_accuracy(scores: &[f64], labels: &[u8], threshold: f64) -> f64 {
    let correct = scores
        .iter()
        .zip(labels)
        .filter(|(&s, &y)| u8::from(s > threshold) == y)
        .count();
    correct as f64 / scores.len() as f64
}

/// Candidate thresholds: one below every score, midpoints between
/// consecutive distinct scores, one above every score. Ascending.
pub fn threshold_candidates(scores: &[f64]) -> Vec<f64> {
    let mut sorted: Vec<f64> = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut out = Vec::with_capacity(sorted.len() + 1);
    if let (Some(&lo), Some(&hi)) = (sorted.first(), sorted.last()) {
        out.push(lo - 1.0);
        out.extend(sorted.windows(2).map(|w| (w[0] + w[1]) / 2.0));
        out.push(hi + 1.0);
    }
    out
}

/// Accuracy-maximizing threshold; ties go to the smallest threshold.
pub fn select_threshold(scores: &[f64], labels: &[u8]) -> Result<ThresholdChoice> {
    if scores.is_empty() || scores.len() != labels.len() {
        return Err(Error::Contract(format!(
            "threshold selection needs equal, non-zero lengths (got {} scores, {} labels)",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Contract("non-finite score".into()));
    }
    let mut best: Option<ThresholdChoice> = None;
    for t in threshold_candidates(scores) {
        let acc = threshold_accuracy(scores, labels, t);
        if best.is_none_or(|b| acc > b.accuracy) {
            best = Some(ThresholdChoice {
                threshold: t,
                accuracy: acc,
            });
        }
    }
    Ok(best.expect("at least two candidates"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassProfile {
    pub label: ClassLabel,
    pub name: String,
    pub count: u64,
    #[serde(with = "opt_ratio")]
    pub mean: Option<Strength>,
    /// Item mean strengths rounded (half up) to the nearest integer 0..=10.
    pub histogram: [u64; HIST_BINS],
}

mod opt_ratio {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::Strength;

    pub fn serialize<S: Serializer>(r: &Option<Strength>, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct W<'a>(#[serde(with = "super::ratio_serde")] &'a Strength);
        r.as_ref().map(W).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Strength>, D::Error> {
        #[derive(Deserialize)]
        struct W(#[serde(with = "super::ratio_serde")] Strength);
        Ok(Option::<W>::deserialize(d)?.map(|w| w.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStrengthProfile {
    pub scheme: Scheme,
    pub classes: Vec<ClassProfile>,
}

fn strength_bin(s: Strength) -> usize {
    crate::resolve::Rounding::HalfUp
        .round(s)
        .min(MAX_STRENGTH as u64) as usize
}

impl ClassStrengthProfile {
    fn empty(scheme: Scheme) -> Self {
        Self {
            scheme,
            classes: scheme
                .labels()
                .map(|l| ClassProfile {
                    label: l,
                    name: scheme.class_name(l).to_string(),
                    count: 0,
                    mean: None,
                    histogram: [0; HIST_BINS],
                })
                .collect(),
        }
    }

    pub fn total(&self) -> u64 {
        self.classes.iter().map(|c| c.count).sum()
    }

    /// Merges a six-class profile into `target` by pooling classes that
    /// reduce to the same label. Means combine weighted by count.
    pub fn reduce_to(&self, target: Scheme) -> Result<Self> {
        if self.scheme != Scheme::Six {
            return Err(Error::Contract(
                "only six-class profiles can be reduced".into(),
            ));
        }
        let mut out = Self::empty(target);
        let mut sums = vec![Strength::from_integer(0); target.num_classes()];
        for c in &self.classes {
            let dst = reduce_unchecked(c.label, target).index();
            let slot = &mut out.classes[dst];
            slot.count += c.count;
            for (h, v) in slot.histogram.iter_mut().zip(c.histogram) {
                *h += v;
            }
            if let Some(m) = c.mean {
                sums[dst] += m * Strength::from_integer(c.count);
            }
        }
        for (slot, sum) in out.classes.iter_mut().zip(sums) {
            if slot.count > 0 {
                slot.mean = Some(sum / Strength::from_integer(slot.count));
            }
        }
        Ok(out)
    }

    /// Text rendering: one histogram row per class with the mean marked.
    pub fn render(&self) -> String {
        let mut out = format!("class-strength profile ({})\n", self.scheme);
        out.push_str("class                              n      mean   0..10\n");
        for c in &self.classes {
            let mean = c.mean.and_then(|m| m.to_f64());
            let peak = c.histogram.iter().copied().max().unwrap_or(0).max(1);
            let bars: String = c
                .histogram
                .iter()
                .enumerate()
                .map(|(i, &h)| {
                    if mean.is_some_and(|m| m.round() as usize == i) {
                        '|'
                    } else {
                        const SHADES: [char; 5] = [' ', '.', ':', '+', '#'];
                        SHADES[(h * 4).div_ceil(peak) as usize]
                    }
                })
                .collect();
            out.push_str(&format!(
                "{:<2} {:<28} {:>6} {:>8}   [{bars}]\n",
                c.label.0,
                c.name,
                c.count,
                mean.map(|m| format!("{m:.2}"))
                    .unwrap_or_else(|| "-".into()),
            ));
        }
        out
    }
}

/// Per resolved class: count, exact mean of item mean strengths, histogram.
pub fn class_strength_profile(
    outcomes: &[AggregationOutcome],
    strengths: &[StrengthAggregate],
    scheme: Scheme,
) -> Result<ClassStrengthProfile> {
    let by_id: HashMap<&str, &StrengthAggregate> =
        strengths.iter().map(|s| (s.item_id.as_str(), s)).collect();
    let unmatched: Vec<String> = outcomes
        .iter()
        .filter(|o| !by_id.contains_key(o.item_id.as_str()))
        .map(|o| o.item_id.clone())
        .collect();
    if !unmatched.is_empty() {
        return Err(Error::Join { ids: unmatched });
    }
    let mut profile = ClassStrengthProfile::empty(scheme);
    let mut sums: BTreeMap<usize, Strength> = BTreeMap::new();
    for o in outcomes {
        if o.scheme != scheme || o.label.index() >= scheme.num_classes() {
            return Err(Error::Contract(format!(
                "outcome for {} is under the {} scheme, expected {scheme}",
                o.item_id, o.scheme
            )));
        }
        let s = by_id[o.item_id.as_str()].mean_strength;
        let slot = &mut profile.classes[o.label.index()];
        slot.count += 1;
        slot.histogram[strength_bin(s)] += 1;
        *sums
            .entry(o.label.index())
            .or_insert_with(|| Strength::from_integer(0)) += s;
    }
    for (idx, sum) in sums {
        let slot = &mut profile.classes[idx];
        slot.mean = Some(sum / Strength::from_integer(slot.count));
    }
    Ok(profile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::AnnotationRecord;
    use crate::resolve::{aggregate, AggregateConfig, Strategy};

    fn item_with_strengths(id: &str, labels: &[i64], s: &[Option<i64>]) -> ItemAnnotations {
        let records = s
            .iter()
            .enumerate()
            .map(|(k, &st)| AnnotationRecord::new(id, format!("a{k}"), labels, st).unwrap())
            .collect();
        ItemAnnotations::new(id, None, records).unwrap()
    }

    fn strengths_item(s: &[i64]) -> ItemAnnotations {
        let s: Vec<_> = s.iter().map(|&v| Some(v)).collect();
        item_with_strengths("x", &[1], &s)
    }

    #[test]
    fn mean_strength_examples() {
        assert_eq!(
            mean_strength(&strengths_item(&[0, 0, 0])).unwrap(),
            Strength::from_integer(0)
        );
        assert_eq!(
            mean_strength(&strengths_item(&[2, 5, 8])).unwrap(),
            Strength::new(15, 3)
        );
        assert_eq!(
            mean_strength(&strengths_item(&[0, 1])).unwrap(),
            Strength::new(1, 2)
        );
    }

    #[test]
    fn missing_strength_lists_annotators() {
        let it = item_with_strengths("x", &[1], &[Some(3), None, None]);
        match mean_strength(&it) {
            Err(Error::MissingStrength { annotators, .. }) => assert_eq!(annotators, ["a1", "a2"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn binarize_examples() {
        assert_eq!(binarize(Strength::from_integer(0), 0.5), 0);
        assert_eq!(binarize(Strength::new(1, 2), 0.5), 0);
        assert_eq!(binarize(Strength::new(7, 3), 0.5), 1);
        assert_eq!(binarize(Strength::new(2, 3), 0.5), 1);
    }

    #[test]
    fn agreement_subset_examples() {
        let items = vec![
            strengths_item(&[0, 0, 0]),
            strengths_item(&[3, 7, 1]),
            strengths_item(&[0, 4, 6]),
        ];
        let kept = strength_agreement_subset(&items).unwrap();
        assert_eq!(kept, items[..2].to_vec());
        assert_eq!(strength_agreement_subset(&kept).unwrap(), kept);
    }

    #[test]
    fn normalization() {
        assert_eq!(
            normalize_scores(&[0.0, 10.0, 5.0, 12.0, -1.0], (0.0, 10.0)).unwrap(),
            [0.0, 1.0, 0.5, 1.0, 0.0]
        );
        assert!(normalize_scores(&[1.0], (2.0, 2.0)).is_err());
        assert!(NormBounds::fit(&[3.0]).is_err());
        let b = NormBounds::fit(&[2.0, -1.0, 4.0]).unwrap();
        assert_eq!((b.min, b.max), (-1.0, 4.0));
    }

    #[test]
    fn ensemble_examples() {
        assert_eq!(ensemble_score(0.3, 0.8, 1.0).unwrap(), 0.3);
        assert_eq!(ensemble_score(0.5, 0.5, DEFAULT_ALPHA).unwrap(), 0.5);
        assert!((ensemble_score(1.0, 0.0, DEFAULT_ALPHA).unwrap() - 0.93).abs() < 1e-15);
        assert!(ensemble_score(1.2, 0.0, 0.5).is_err());
        assert!(ensemble_score(0.2, 0.0, 1.5).is_err());
    }

    #[test]
    fn threshold_examples() {
        let c = select_threshold(&[0.1, 0.9], &[0, 1]).unwrap();
        assert_eq!((c.threshold, c.accuracy), (0.5, 1.0));

        let c = select_threshold(&[0.3, 0.7, 0.2], &[0, 0, 0]).unwrap();
        assert!(c.threshold > 0.7);
        assert_eq!(c.accuracy, 1.0);

        let scores = [0.2, 0.4, 0.6, 0.8];
        let labels = [0, 1, 0, 1];
        let c = select_threshold(&scores, &labels).unwrap();
        assert_eq!(c.accuracy, 0.75);
        // brute force over midpoints; smallest optimal threshold wins
        let mut best = (f64::NAN, -1.0);
        for t in [0.3, 0.5, 0.7] {
            let acc = threshold_accuracy(&scores, &labels, t);
            if acc > best.1 {
                best = (t, acc);
            }
        }
        assert!((c.threshold - best.0).abs() < 1e-12);
        assert!(select_threshold(&[], &[]).is_err());
    }

    #[test]
    fn profile_examples() {
        let cfg = AggregateConfig::default();
        let single = item_with_strengths("s", &[0], &[Some(0)]);
        let o = aggregate(&single, Scheme::Six, Strategy::SIMPLE, &cfg).unwrap();
        let s = StrengthAggregate::from_item(&single, 0.5).unwrap();
        let p = class_strength_profile(&[o], &[s], Scheme::Six).unwrap();
        assert_eq!(p.classes[0].mean, Some(Strength::from_integer(0)));
        assert_eq!(p.total(), 1);

        // two classes: class 1 items with means 3 and 4, class 4 item with mean 8
        let items = [
            item_with_strengths("a", &[1], &[Some(2), Some(4)]),
            item_with_strengths("b", &[1], &[Some(4), Some(4)]),
            item_with_strengths("c", &[4], &[Some(7), Some(9)]),
        ];
        let outs: Vec<_> = items
            .iter()
            .map(|i| aggregate(i, Scheme::Six, Strategy::SIMPLE, &cfg).unwrap())
            .collect();
        let ss: Vec<_> = items
            .iter()
            .map(|i| StrengthAggregate::from_item(i, 0.5).unwrap())
            .collect();
        let p = class_strength_profile(&outs, &ss, Scheme::Six).unwrap();
        assert_eq!(p.classes[1].mean, Some(Strength::new(7, 2)));
        assert_eq!(p.classes[1].count, 2);
        assert_eq!(p.classes[4].mean, Some(Strength::from_integer(8)));
        assert_eq!(p.classes[1].histogram[3] + p.classes[1].histogram[4], 2);
        assert!(p.render().contains("swearing"));

        let err = class_strength_profile(&outs, &ss[..1], Scheme::Six).unwrap_err();
        assert!(matches!(err, Error::Join { ref ids } if ids == &["b", "c"]));
    }

    #[test]
    fn aggregate_serde_keeps_exact_mean() {
        let s = StrengthAggregate::from_item(&strengths_item(&[0, 1, 1]), 0.5).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        let back: StrengthAggregate = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.mean_strength, Strength::new(2, 3));
    }
}
