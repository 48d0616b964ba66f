use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scheme::{ClassLabel, Scheme};

pub const MAX_STRENGTH: u8 = 10;

/// One annotator's judgment of one item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub item_id: String,
    pub annotator_id: String,
    labels: Vec<ClassLabel>,
    pub strength: Option<u8>,
}

impl AnnotationRecord {
    /// Builds a record, rejecting empty, duplicated or out-of-range labels,
    /// label 0 mixed with hate labels, and strengths above 10. Labels are
    /// stored sorted.
    pub fn new(
        item_id: impl Into<String>,
        annotator_id: impl Into<String>,
        labels: &[i64],
        strength: Option<i64>,
    ) -> Result<Self> {
        let item_id = item_id.into();
        let annotator_id = annotator_id.into();
        if labels.is_empty() {
            return Err(Error::Contract(format!(
                "annotator {annotator_id} gave no labels for item {item_id}"
            )));
        }
        let mut parsed = labels
            .iter()
            .map(|&l| Scheme::Six.validate(l))
            .collect::<Result<Vec<_>>>()?;
        parsed.sort_unstable();
        if parsed.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Contract(format!(
                "annotator {annotator_id} repeated a label on item {item_id}"
            )));
        }
        if parsed.len() > 1 && parsed[0] == ClassLabel(0) {
            return Err(Error::Contradiction {
                line: 0,
                item_id,
                annotator_id,
            });
        }
        let strength = match strength {
            None => None,
            Some(s) if (0..=MAX_STRENGTH as i64).contains(&s) => Some(s as u8),
            Some(s) => return Err(Error::Contract(format!(
                "strength {s} outside 0-{MAX_STRENGTH} (item {item_id}, annotator {annotator_id})"
            ))),
        };
        Ok(Self {
            item_id,
            annotator_id,
            labels: parsed,
            strength,
        })
    }

    /// Sorted, duplicate-free six-class labels.
    pub fn labels(&self) -> &[ClassLabel] {
        &self.labels
    }
}

/// All annotators' records for one item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemAnnotations {
    pub item_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    records: Vec<AnnotationRecord>,
}

impl ItemAnnotations {
    pub fn new(
        item_id: impl Into<String>,
        text: Option<String>,
        records: Vec<AnnotationRecord>,
    ) -> Result<Self> {
        let item_id = item_id.into();
        if records.is_empty() {
            return Err(Error::EmptyItem { item_id });
        }
        let mut seen = HashSet::new();
        for r in &records {
            if r.item_id != item_id {
                return Err(Error::Contract(format!(
                    "record for item {} filed under item {item_id}",
                    r.item_id
                )));
            }
            if !seen.insert(r.annotator_id.as_str()) {
                return Err(Error::DuplicateAnnotation {
                    line: 0,
                    item_id,
                    annotator_id: r.annotator_id.clone(),
                });
            }
        }
        Ok(Self {
            item_id,
            text,
            records,
        })
    }

    /// Shorthand for tests and fixtures: annotators are named `a1`, `a2`, ...
    pub fn from_label_sets(item_id: &str, sets: &[&[i64]]) -> Result<Self> {
        let records = sets
            .iter()
            .enumerate()
            .map(|(k, s)| AnnotationRecord::new(item_id, format!("a{}", k + 1), s, None))
            .collect::<Result<Vec<_>>>()?;
        Self::new(item_id, None, records)
    }

    pub fn records(&self) -> &[AnnotationRecord] {
        &self.records
    }

    pub fn num_annotators(&self) -> usize {
        self.records.len()
    }

    /// Reorders the records; aggregation results must not depend on order.
    pub fn permute(&mut self, order: &[usize]) {
        debug_assert_eq!(order.len(), self.records.len());
        self.records = order.iter().map(|&i| self.records[i].clone()).collect();
    }
}
