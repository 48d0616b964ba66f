use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::pipeline::parse::Dataset;
use crate::scheme::Scheme;
use crate::vote::{classify_scenario_with, Counting, ScenarioTag};

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub test_fraction: f64,
    /// Share of the train pool carved out as validation.
    pub validation_of_train: f64,
    pub seed: u64,
    /// Shuffle and cut each scenario group separately under this scheme.
    #[serde(default)]
    pub stratify_by_scenario: Option<Scheme>,
}

impl SplitSpec {
    pub fn new(seed: u64) -> Self {
        Self {
            train_fraction: 0.80,
            test_fraction: 0.20,
            validation_of_train: 0.05,
            seed,
            stratify_by_scenario: None,
        }
    }

    fn validate(&self) -> Result<()> {
        let unit = 0.0..=1.0;
        if !unit.contains(&self.train_fraction)
            || !unit.contains(&self.test_fraction)
            || !unit.contains(&self.validation_of_train)
            || (self.train_fraction + self.test_fraction - 1.0).abs() > EPS
        {
            return Err(Error::Config(format!(
                "split fractions must lie in [0,1] with train + test = 1 (got {} / {} / {})",
                self.train_fraction, self.test_fraction, self.validation_of_train
            )));
        }
        Ok(())
    }

    /// (train, validation, test) sizes for `n` items: the train pool is
    /// `floor(n * train_fraction)`, validation is `ceil(pool * validation_of_train)`.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let pool = ((n as f64) * self.train_fraction + EPS).floor() as usize;
        let pool = pool.min(n);
        let val = ((pool as f64) * self.validation_of_train - EPS)
            .ceil()
            .max(0.0) as usize;
        let val = val.min(pool);
        (pool - val, val, n - pool)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub content_hash: String,
    pub seed: u64,
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

impl Split {
    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn split_rng(content_hash: &str, seed: u64, group: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(b"agree-kit/split/v1\0");
    h.update(content_hash.as_bytes());
    h.update(seed.to_le_bytes());
    h.update(group.as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

fn cut(
    mut ids: Vec<String>,
    spec: &SplitSpec,
    rng: &mut ChaCha8Rng,
) -> (Vec<String>, Vec<String>, Vec<String>) {
    // canonical order first so input ordering never leaks into the split
    ids.sort();
    ids.shuffle(rng);
    let (train, val, _) = spec.sizes(ids.len());
    let test = ids.split_off(train + val);
    let train_ids = ids.split_off(val);
    (train_ids, ids, test)
}

/// Seeded partition into train / validation / test. Deterministic for a
/// given (content hash, seed).
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let n = ds.len();
    let (tr, va, te) = spec.sizes(n);
    if n < 5 || tr == 0 || va == 0 || te == 0 {
        return Err(Error::Contract(format!(
            "{n} items cannot fill train/validation/test ({tr}/{va}/{te})"
        )));
    }
    let hash = &ds.provenance.content_hash;
    let ids: Vec<String> = ds.items.iter().map(|i| i.item_id.clone()).collect();
    let (train, validation, test) = match spec.stratify_by_scenario {
        None => cut(ids, spec, &mut split_rng(hash, spec.seed, "")),
        Some(scheme) => {
            let mut groups: BTreeMap<ScenarioTag, Vec<String>> = BTreeMap::new();
            for item in &ds.items {
                let tag = classify_scenario_with(item, scheme, Counting::Incidence)?;
                groups.entry(tag).or_default().push(item.item_id.clone());
            }
            let mut out = (Vec::new(), Vec::new(), Vec::new());
            for (tag, ids) in groups {
                let (a, b, c) = cut(ids, spec, &mut split_rng(hash, spec.seed, tag.as_str()));
                out.0.extend(a);
                out.1.extend(b);
                out.2.extend(c);
            }
            out
        }
    };
    Ok(Split {
        content_hash: hash.clone(),
        seed: spec.seed,
        train,
        validation,
        test,
    })
}
