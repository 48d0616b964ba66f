mod common;

use std::collections::BTreeSet;

use agree_kit::annotation::{AnnotationRecord, ItemAnnotations};
use agree_kit::eval::{argmax, score_labels};
use agree_kit::pipeline::{self, parse, split, Format, SplitSpec};
use agree_kit::resolve::{
    aggregate, resolve_mean, AggregateConfig, Rounding, Strategy as Tiebreak,
};
use agree_kit::scheme::{reduce_label, ClassLabel, Scheme};
use agree_kit::strength::{class_strength_profile, NormBounds, StrengthAggregate};
use agree_kit::vote::{
    majority_set, tally, tally_with, weighted_tally, Counting, MajoritySet, Mass,
};
use proptest::prelude::*;

fn label_set() -> impl Strategy<Value = Vec<i64>> {
    prop_oneof![
        1 => Just(vec![0i64]),
        4 => proptest::collection::btree_set(1i64..=5, 1..=3).prop_map(|s| s.into_iter().collect()),
    ]
}

fn item() -> impl Strategy<Value = ItemAnnotations> {
    proptest::collection::vec((label_set(), 0i64..=10), 1..=6).prop_map(|recs| {
        let records = recs
            .iter()
            .enumerate()
            .map(|(k, (l, s))| AnnotationRecord::new("p", format!("a{k}"), l, Some(*s)).unwrap())
            .collect();
        ItemAnnotations::new("p", None, records).unwrap()
    })
}

fn corpus(max: usize) -> impl Strategy<Value = Vec<ItemAnnotations>> {
    proptest::collection::vec(item(), 5..max).prop_map(|items| {
        items
            .into_iter()
            .enumerate()
            .map(|(i, it)| {
                let id = format!("c{i:03}");
                let records = it
                    .records()
                    .iter()
                    .map(|r| {
                        let l: Vec<i64> = r.labels().iter().map(|l| l.0 as i64).collect();
                        AnnotationRecord::new(
                            &id,
                            r.annotator_id.clone(),
                            &l,
                            r.strength.map(i64::from),
                        )
                        .unwrap()
                    })
                    .collect();
                ItemAnnotations::new(id, Some(format!("text {i}")), records).unwrap()
            })
            .collect()
    })
}

fn scheme() -> impl Strategy<Value = Scheme> {
    prop_oneof![Just(Scheme::Six), Just(Scheme::Four), Just(Scheme::Two)]
}

proptest! {
    #[test]
    fn tallies_ignore_annotator_order(it in item(), s in scheme(), rot in 0usize..6) {
        let n = it.num_annotators();
        let order: Vec<usize> = (0..n).map(|i| (i + rot) % n).rev().collect();
        let mut shuffled = it.clone();
        shuffled.permute(&order);
        prop_assert_eq!(tally(&it, s).unwrap(), tally(&shuffled, s).unwrap());
        prop_assert_eq!(weighted_tally(&it, s).unwrap(), weighted_tally(&shuffled, s).unwrap());
    }

    #[test]
    fn weighted_mass_equals_annotator_count(it in item(), s in scheme(), dedupe in any::<bool>()) {
        let counting = if dedupe { Counting::Deduped } else { Counting::Incidence };
        let t = tally_with(&it, s, counting, true).unwrap();
        prop_assert_eq!(t.total(), Mass::from_integer(it.num_annotators() as u64));
    }

    #[test]
    fn plain_mass_equals_incidences(it in item(), s in scheme()) {
        let incidences: usize = it.records().iter().map(|r| r.labels().len()).sum();
        prop_assert_eq!(tally(&it, s).unwrap().total(), Mass::from_integer(incidences as u64));
    }

    #[test]
    fn tallies_match_oracle(it in item(), s in scheme()) {
        let (plain, w60) = common::naive_tallies(&common::label_sets(&it), s);
        let t = tally(&it, s).unwrap();
        let wt = weighted_tally(&it, s).unwrap();
        for l in 0..s.num_classes() {
            prop_assert_eq!(t.masses()[l], Mass::from_integer(plain[l]));
            prop_assert_eq!(wt.masses()[l], Mass::new(w60[l], 60));
        }
    }

    #[test]
    fn every_strategy_lands_in_range(it in item(), s in scheme(), seed in any::<u64>()) {
        let cfg = AggregateConfig { seed: Some(seed), ..AggregateConfig::default() };
        for strategy in Tiebreak::ALL {
            match aggregate(&it, s, strategy, &cfg) {
                Ok(out) => {
                    prop_assert!(out.label.index() < s.num_classes());
                    prop_assert!(out.label >= out.majority.min() && out.label <= out.majority.max());
                    if strategy.name() != "mean" && strategy.name() != "wmean" {
                        prop_assert!(out.majority.contains(out.label));
                    }
                }
                Err(e) => {
                    prop_assert!(strategy.name() == "simple" || strategy.name() == "weighted", "{e}");
                }
            }
        }
    }

    #[test]
    fn mean_rounding_modes_differ_only_on_halves(
        labels in proptest::collection::btree_set(0u8..6, 1..=6)
    ) {
        let m = MajoritySet::new(labels.iter().map(|&l| ClassLabel(l)).collect()).unwrap();
        let up = resolve_mean(&m, Rounding::HalfUp);
        let even = resolve_mean(&m, Rounding::HalfEven);
        let sum: u32 = labels.iter().map(|&l| u32::from(l)).sum();
        let n = labels.len() as u32;
        if !(2 * sum).is_multiple_of(n) || (2 * sum / n).is_multiple_of(2) {
            prop_assert_eq!(up, even);
        } else {
            prop_assert!(up.0 == even.0 || up.0 == even.0 + 1);
        }
    }

    #[test]
    fn reductions_are_monotone(a in 0u8..6, b in 0u8..6, s in scheme()) {
        let (ra, rb) = (reduce_label(ClassLabel(a), s).unwrap(), reduce_label(ClassLabel(b), s).unwrap());
        if a <= b {
            prop_assert!(ra <= rb);
        }
    }

    #[test]
    fn parse_round_trips(items in corpus(30)) {
        for format in [Format::Jsonl, Format::Csv] {
            let bytes = match format {
                Format::Jsonl => parse::to_jsonl(&items),
                Format::Csv => parse::to_csv(&items),
            };
            let ds = pipeline::parse_bytes(&bytes, format, "rt").unwrap();
            prop_assert_eq!(&ds.items, &items);
        }
    }

    #[test]
    fn splits_partition_the_ids(items in corpus(60), seed in any::<u64>(), strat in any::<bool>()) {
        let ds = pipeline::parse_bytes(&parse::to_jsonl(&items), Format::Jsonl, "s").unwrap();
        let mut spec = SplitSpec::new(seed);
        if strat {
            spec.stratify_by_scenario = Some(Scheme::Six);
        }
        let Ok(parts) = split(&ds, &spec) else {
            // stratified groups may be too small to fill every partition
            prop_assume!(false);
            unreachable!()
        };
        let all: BTreeSet<&String> = parts.train.iter().chain(&parts.validation).chain(&parts.test).collect();
        prop_assert_eq!(all.len(), items.len());
        prop_assert_eq!(parts.train.len() + parts.validation.len() + parts.test.len(), items.len());
        if !strat {
            let (tr, va, te) = spec.sizes(items.len());
            prop_assert_eq!((parts.train.len(), parts.validation.len(), parts.test.len()), (tr, va, te));
        }
    }

    #[test]
    fn reduced_profile_matches_profile_of_reduced_labels(items in corpus(40)) {
        let cfg = AggregateConfig::default();
        let strengths: Vec<StrengthAggregate> =
            items.iter().map(|i| StrengthAggregate::from_item(i, 0.5).unwrap()).collect();
        let six: Vec<_> = items.iter().map(|i| aggregate(i, Scheme::Six, "max".parse().unwrap(), &cfg).unwrap()).collect();
        let profile = class_strength_profile(&six, &strengths, Scheme::Six).unwrap();
        for target in [Scheme::Four, Scheme::Two] {
            // relabel the six-class winners instead of re-voting in the target scheme
            let relabeled: Vec<_> = six
                .iter()
                .cloned()
                .map(|mut o| {
                    o.label = reduce_label(o.label, target).unwrap();
                    o.scheme = target;
                    o
                })
                .collect();
            let direct = class_strength_profile(&relabeled, &strengths, target).unwrap();
            prop_assert_eq!(profile.reduce_to(target).unwrap(), direct);
        }
    }

    #[test]
    fn macro_f1_ignores_row_order(
        pairs in proptest::collection::vec((0u8..4, 0u8..4), 1..50),
        rot in 0usize..50,
    ) {
        let labelled: Vec<(ClassLabel, ClassLabel)> =
            pairs.iter().map(|&(g, p)| (ClassLabel(g), ClassLabel(p))).collect();
        let mut rotated = labelled.clone();
        let k = rot % rotated.len();
        rotated.rotate_left(k);
        let a = score_labels(&labelled, Scheme::Four);
        let b = score_labels(&rotated, Scheme::Four);
        prop_assert!((a.macro_f1 - b.macro_f1).abs() < 1e-9);
        prop_assert!((a.accuracy - b.accuracy).abs() < 1e-9);
        let gold: Vec<u8> = pairs.iter().map(|p| p.0).collect();
        let pred: Vec<u8> = pairs.iter().map(|p| p.1).collect();
        let (acc, f1) = common::naive_metrics(&gold, &pred, 4);
        prop_assert!((a.accuracy - acc).abs() < 1e-9 && (a.macro_f1 - f1).abs() < 1e-9);
    }

    #[test]
    fn argmax_picks_first_maximum(scores in proptest::collection::vec(0u8..4, 1..8)) {
        let f: Vec<f64> = scores.iter().map(|&s| f64::from(s)).collect();
        let best = *scores.iter().max().unwrap();
        prop_assert_eq!(argmax(&f), scores.iter().position(|&s| s == best));
    }

    #[test]
    fn normalization_stays_in_unit_range(
        fit in proptest::collection::vec(-100.0f64..100.0, 2..20),
        x in -1000.0f64..1000.0,
    ) {
        if let Ok(b) = NormBounds::fit(&fit) {
            let y = b.apply(x);
            prop_assert!((0.0..=1.0).contains(&y));
        }
    }

    #[test]
    fn majority_is_argmax(it in item(), s in scheme()) {
        let t = tally(&it, s).unwrap();
        let m = majority_set(&t).unwrap();
        let best = t.masses().iter().max().unwrap();
        for (l, mass) in t.masses().iter().enumerate() {
            prop_assert_eq!(m.contains(ClassLabel(l as u8)), mass == best);
        }
    }
}
