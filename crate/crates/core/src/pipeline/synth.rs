//! Seeded synthetic annotation corpora for fixtures and benchmarks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::annotation::{AnnotationRecord, ItemAnnotations};

/// Generates `n` items with 3 annotators each. Roughly half the items are
/// unanimous; the rest mix in neighbouring classes and multi-label picks.
/// Every record carries a strength loosely tied to its class.
pub fn synthetic_items(n: usize, seed: u64) -> Vec<ItemAnnotations> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let item_id = format!("syn{i:05}");
            let base: i64 = if rng.gen_bool(0.45) {
                0
            } else {
                rng.gen_range(1..6)
            };
            let unanimous = rng.gen_bool(0.5);
            let annotators = if rng.gen_bool(0.85) {
                3
            } else {
                rng.gen_range(1..6)
            };
            let records = (0..annotators)
                .map(|k| {
                    let labels = if unanimous {
                        vec![base]
                    } else {
                        pick_labels(&mut rng, base)
                    };
                    let top = *labels.iter().max().unwrap_or(&0);
                    let strength = if top == 0 {
                        i64::from(rng.gen_bool(0.1))
                    } else {
                        (top + rng.gen_range(-1..=4)).clamp(0, 10)
                    };
                    AnnotationRecord::new(&item_id, format!("ann{k}"), &labels, Some(strength))
                        .expect("generator emits valid records")
                })
                .collect();
            ItemAnnotations::new(item_id, Some(format!("synthetic text {i}")), records)
                .expect("generator emits valid items")
        })
        .collect()
}

fn pick_labels(rng: &mut ChaCha8Rng, base: i64) -> Vec<i64> {
    let first = if rng.gen_bool(0.6) {
        base
    } else {
        (base + rng.gen_range(-1..=1)).clamp(0, 5)
    };
    if first == 0 || rng.gen_bool(0.6) {
        return vec![first];
    }
    let second = rng.gen_range(1..6);
    if second == first {
        vec![first]
    } else {
        vec![first, second]
    }
}
