#![allow(dead_code)]

use agree_kit::annotation::{AnnotationRecord, ItemAnnotations};
use agree_kit::scheme::Scheme;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random item: 1-5 annotators, each either {0} or 1-3 distinct labels
/// from 1..=5. Strengths in 0..=10.
pub fn random_item(rng: &mut ChaCha8Rng, id: &str) -> ItemAnnotations {
    let n = rng.gen_range(1..=5);
    let records = (0..n)
        .map(|k| {
            let labels: Vec<i64> = if rng.gen_bool(0.3) {
                vec![0]
            } else {
                let mut l: Vec<i64> = (1..=5).filter(|_| rng.gen_bool(0.35)).collect();
                if l.is_empty() {
                    l.push(rng.gen_range(1..=5));
                }
                l.truncate(3);
                l
            };
            AnnotationRecord::new(id, format!("a{k}"), &labels, Some(rng.gen_range(0..=10)))
                .unwrap()
        })
        .collect();
    ItemAnnotations::new(id, None, records).unwrap()
}

pub fn random_items(n: usize, seed: u64) -> Vec<ItemAnnotations> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| random_item(&mut rng, &format!("r{i:05}")))
        .collect()
}

/// Reduction written out as a lookup, independent of the library tables.
pub fn naive_reduce(label: u8, scheme: Scheme) -> u8 {
    match scheme {
        Scheme::Six => label,
        Scheme::Four => match label {
            0 => 0,
            1 => 1,
            2 | 3 => 2,
            _ => 3,
        },
        Scheme::Two => u8::from(label > 0),
    }
}

/// Plain counts and weighted masses scaled by 60 (divisible by every
/// annotation-set size up to 5), computed by direct loops.
pub fn naive_tallies(sets: &[Vec<u8>], scheme: Scheme) -> (Vec<u64>, Vec<u64>) {
    let k = scheme.num_classes();
    let mut plain = vec![0u64; k];
    let mut weighted = vec![0u64; k];
    for set in sets {
        for &l in set {
            let r = naive_reduce(l, scheme) as usize;
            plain[r] += 1;
            weighted[r] += 60 / set.len() as u64;
        }
    }
    (plain, weighted)
}

pub fn naive_argmax(v: &[u64]) -> Vec<u8> {
    let best = *v.iter().max().unwrap();
    (0..v.len())
        .filter(|&i| v[i] == best)
        .map(|i| i as u8)
        .collect()
}

/// "agreement", "clear_majority" or "no_clear_majority".
pub fn naive_scenario(sets: &[Vec<u8>], scheme: Scheme) -> &'static str {
    let reduced: Vec<Vec<u8>> = sets
        .iter()
        .map(|s| {
            let mut r: Vec<u8> = s.iter().map(|&l| naive_reduce(l, scheme)).collect();
            r.sort();
            r.dedup();
            r
        })
        .collect();
    if reduced.iter().all(|r| r.len() == 1 && r == &reduced[0]) {
        return "agreement";
    }
    let (plain, _) = naive_tallies(sets, scheme);
    if naive_argmax(&plain).len() == 1 {
        "clear_majority"
    } else {
        "no_clear_majority"
    }
}

pub fn label_sets(item: &ItemAnnotations) -> Vec<Vec<u8>> {
    item.records()
        .iter()
        .map(|r| r.labels().iter().map(|l| l.0).collect())
        .collect()
}

/// Confusion-matrix oracle: (accuracy %, macro-F1 % over classes with gold
/// support).
pub fn naive_metrics(gold: &[u8], pred: &[u8], k: usize) -> (f64, f64) {
    let n = gold.len();
    let correct = gold.iter().zip(pred).filter(|(g, p)| g == p).count();
    let mut f1s = Vec::new();
    for c in 0..k as u8 {
        let tp = gold
            .iter()
            .zip(pred)
            .filter(|&(&g, &p)| g == c && p == c)
            .count() as f64;
        let fp = gold
            .iter()
            .zip(pred)
            .filter(|&(&g, &p)| g != c && p == c)
            .count() as f64;
        let fneg = gold
            .iter()
            .zip(pred)
            .filter(|&(&g, &p)| g == c && p != c)
            .count() as f64;
        if tp + fneg == 0.0 {
            continue;
        }
        // F1 = 2TP / (2TP + FP + FN)
        f1s.push(if tp == 0.0 {
            0.0
        } else {
            2.0 * tp / (2.0 * tp + fp + fneg)
        });
    }
    let macro_f1 = 100.0 * f1s.iter().sum::<f64>() / f1s.len() as f64;
    (100.0 * correct as f64 / n as f64, macro_f1)
}

/// RMSE through bias and population variance of the errors.
pub fn naive_rmse(pred: &[f64], gold: &[f64]) -> f64 {
    let e: Vec<f64> = pred.iter().zip(gold).map(|(p, g)| p - g).collect();
    let n = e.len() as f64;
    let mean = e.iter().sum::<f64>() / n;
    let var = e.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean * mean + var).sqrt()
}
