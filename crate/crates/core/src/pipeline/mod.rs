//! Ingestion, splitting, experiment materialization and corpus statistics.

pub mod experiment;
pub mod output;
pub mod parse;
pub mod split;
pub mod stats;
pub mod synth;

pub use experiment::{
    build_experiment, build_test_sets, ExperimentBuild, ExperimentId, ExperimentSpec,
    StrengthOptions, StrengthSubset, TestSets, TrainRows,
};
pub use parse::{parse_annotations, parse_bytes, Dataset, Format, Provenance};
pub use split::{split, Split, SplitSpec};
pub use stats::{stats_report, StatsReport};
