//! Aggregation of multi-annotator, multi-label annotations into gold labels.
//!
//! The crate covers the whole path from raw annotation exports to evaluation:
//!
//! * [`scheme`]: six-, four- and two-class label universes and reductions.
//! * [`vote`]: plain and weighted tallies, majority sets, agreement scenarios.
//! * [`resolve`]: min / max / mean / random tie-breaking, plain or weighted.
//! * [`strength`]: 0-10 strength means, binarization, score ensembling,
//!   threshold selection and per-class strength profiles.
//! * [`pipeline`]: JSONL/CSV ingestion, seeded splits, experiment datasets,
//!   Gold/Silver test sets and corpus statistics.
//! * [`eval`]: macro-F1, accuracy and RMSE over external predictions.
//! * [`cli`]: the `agree-kit` command line.
//!
//! ```
//! use agree_kit::annotation::ItemAnnotations;
//! use agree_kit::resolve::{aggregate, AggregateConfig};
//! use agree_kit::scheme::Scheme;
//!
//! let item = ItemAnnotations::from_label_sets("t1", &[&[4, 5], &[1, 5], &[2, 4]]).unwrap();
//! let cfg = AggregateConfig::default();
//! let min = aggregate(&item, Scheme::Six, "min".parse().unwrap(), &cfg).unwrap();
//! let max = aggregate(&item, Scheme::Six, "max".parse().unwrap(), &cfg).unwrap();
//! assert_eq!((min.label.0, max.label.0), (4, 5));
//! ```

pub mod annotation;
pub mod cli;
pub mod error;
pub mod eval;
pub mod pipeline;
pub mod resolve;
pub mod scheme;
pub mod strength;
pub mod vote;

pub use annotation::{AnnotationRecord, ItemAnnotations};
pub use error::{Error, ErrorClass, Result};
pub use resolve::{aggregate, AggregateConfig, AggregationOutcome, Rounding, Strategy};
pub use scheme::{reduce_label, ClassLabel, Scheme};
pub use vote::{
    classify_scenario, majority_set, tally, weighted_tally, Counting, MajoritySet, ScenarioTag,
    VoteTally,
};
