//! The `agree-kit` command line.
//!
//! Settings resolve as: command-line flags, then the `--config` TOML file,
//! then built-in defaults. Every run writes its resolved settings to
//! `run_config.json` next to its other artifacts.

use std::collections::{BTreeMap, HashMap};
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::builder::PossibleValuesParser;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::eval::{
    average_predictions, evaluate_classification, evaluate_regression, evaluate_thresholded,
    parse_predictions, EvalReport, Prediction, PredictionSet,
};
use crate::pipeline::experiment::{ExperimentId, ExperimentSpec, StrengthOptions, StrengthSubset};
use crate::pipeline::output::{jsonl, pretty_json, write_atomic};
use crate::pipeline::{self, Dataset, Format, Split, SplitSpec};
use crate::resolve::{aggregate, AggregateConfig, Rounding, Strategy};
use crate::scheme::{ClassLabel, Scheme};
use crate::strength::{
    class_strength_profile, select_threshold, strength_agreement_subset, EnsembleConfig,
    NormBounds, StrengthAggregate, DEFAULT_ALPHA, DEFAULT_BINARIZE_THRESHOLD,
};
use crate::vote::{Counting, ScenarioTag};

const STRATEGY_NAMES: [&str; 10] = [
    "simple", "weighted", "min", "wmin", "max", "wmax", "mean", "wmean", "random", "wrandom",
];

#[derive(Debug, Parser)]
#[command(
    name = "agree-kit",
    version,
    about = "Aggregate multi-annotator labels into gold-standard datasets",
    after_help = "Strategies: simple, weighted, min, wmin, max, wmax, mean, wmean, random, wrandom.\n\
                  The w-prefixed variants split each annotator's vote evenly over the labels they chose.\n\n\
                  Exit status: 0 ok, 2 validation error, 3 coverage/join error, 4 I/O error."
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Label scheme: 6, 4 or 2 classes.
    #[arg(long, global = true, value_parser = PossibleValuesParser::new(["6", "4", "2", "six", "four", "two"]))]
    pub scheme: Option<String>,
    /// Tie-breaking strategy.
    #[arg(long, global = true, value_parser = PossibleValuesParser::new(STRATEGY_NAMES))]
    pub strategy: Option<String>,
    /// Seed for random tie-breaking and splits.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Rounding of .5 means for mean strategies.
    #[arg(long, global = true, value_parser = PossibleValuesParser::new(["half-up", "half-even"]))]
    pub rounding: Option<String>,
    /// Count merged labels once per annotator in reduced schemes.
    #[arg(long, global = true)]
    pub dedupe_reduced: bool,
    /// Input format (default: from the file extension, else jsonl).
    #[arg(long, global = true, value_parser = PossibleValuesParser::new(["jsonl", "csv"]))]
    pub format: Option<String>,
    /// Directory receiving all artifacts.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// TOML file with default settings.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Suppress the summary on stdout.
    #[arg(short, long, global = true)]
    pub quiet: bool,
    /// Print errors as one JSON object on stderr.
    #[arg(long, global = true)]
    pub json_errors: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate an export and write it back as normalized JSONL.
    Parse { input: PathBuf },
    /// Resolve one label per item.
    Aggregate { input: PathBuf },
    /// Seeded train/validation/test partition.
    Split {
        input: PathBuf,
        #[command(flatten)]
        split: SplitArgs,
    },
    /// Materialize an experiment dataset (E1-E5) with Gold/Silver test sets.
    BuildExp {
        input: PathBuf,
        #[arg(long, value_parser = PossibleValuesParser::new(["E1", "E2", "E3", "E4", "E5", "e1", "e2", "e3", "e4", "e5"]))]
        experiment: String,
        /// E4: pair wmin/wmax instead of min/max.
        #[arg(long)]
        weighted: bool,
        #[command(flatten)]
        strength: StrengthArgs,
        /// E5: subset used for train and validation.
        #[arg(long, value_parser = PossibleValuesParser::new(["all", "agreements"]))]
        train_subset: Option<String>,
        /// E5: subset used for the test strength file.
        #[arg(long, value_parser = PossibleValuesParser::new(["all", "agreements"]))]
        test_subset: Option<String>,
        #[command(flatten)]
        split: SplitArgs,
    },
    /// Scenario rates, class distribution and strength profile.
    Stats { input: PathBuf },
    /// Strength means, binary labels and the optional score ensemble.
    Strength {
        input: PathBuf,
        #[command(flatten)]
        strength: StrengthArgs,
        /// Ensemble weight of the regression score.
        #[arg(long)]
        alpha: Option<f64>,
        /// Keep only items whose annotators agree on zero vs. positive strength.
        #[arg(long)]
        agreement_only: bool,
        /// Regression model scores (JSONL with "score").
        #[arg(long, requires_all = ["classifier_scores", "split_manifest"])]
        regression_scores: Option<PathBuf>,
        /// Binary classifier scores (JSONL with "score" or two-element "scores").
        #[arg(long)]
        classifier_scores: Option<PathBuf>,
        /// Split manifest; bounds and threshold are fitted on its validation ids.
        #[arg(long)]
        split_manifest: Option<PathBuf>,
    },
    /// Score predictions against gold labels or strengths.
    Eval {
        #[arg(long, value_parser = PossibleValuesParser::new(["classify", "regression", "threshold", "average"]), default_value = "classify")]
        mode: String,
        #[arg(long)]
        predictions: PathBuf,
        /// Second prediction set for --mode average.
        #[arg(long)]
        predictions_b: Option<PathBuf>,
        #[arg(long)]
        gold: PathBuf,
        /// Decision threshold for regression/threshold modes.
        #[arg(long)]
        threshold: Option<f64>,
        /// Validation scores used to pick the threshold.
        #[arg(long, requires = "validation_gold")]
        validation_predictions: Option<PathBuf>,
        #[arg(long)]
        validation_gold: Option<PathBuf>,
        /// Row label in the text table.
        #[arg(long, default_value = "model")]
        label: String,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    pub validation_fraction: Option<f64>,
    /// Cut each scenario group separately.
    #[arg(long)]
    pub stratify_by_scenario: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct StrengthArgs {
    /// Mean strengths strictly above this are hate.
    #[arg(long)]
    pub threshold: Option<f64>,
}

/// Settings readable from a `--config` TOML file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub scheme: Option<String>,
    pub strategy: Option<String>,
    pub seed: Option<u64>,
    pub rounding: Option<String>,
    pub dedupe_reduced: Option<bool>,
    pub format: Option<String>,
    pub output_dir: Option<PathBuf>,
    pub alpha: Option<f64>,
    pub threshold: Option<f64>,
    pub train_fraction: Option<f64>,
    pub validation_fraction: Option<f64>,
    pub stratify_by_scenario: Option<bool>,
    pub quiet: Option<bool>,
}

/// Fully resolved settings of one run.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub tool: String,
    pub subcommand: String,
    pub inputs: BTreeMap<String, String>,
    pub scheme: Scheme,
    pub strategy: Option<Strategy>,
    pub seed: Option<u64>,
    pub rounding: Rounding,
    pub counting: Counting,
    pub format: Option<Format>,
    pub options: BTreeMap<String, Value>,
    #[serde(skip)]
    pub output_dir: PathBuf,
    #[serde(skip)]
    pub quiet: bool,
}

impl RunConfig {
    fn aggregate_config(&self) -> AggregateConfig {
        AggregateConfig {
            counting: self.counting,
            rounding: self.rounding,
            seed: self.seed,
        }
    }
}

/// What a successful run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub artifacts: Vec<PathBuf>,
    pub summary: String,
}

struct Resolver {
    common: CommonArgs,
    file: FileConfig,
}

impl Resolver {
    fn new(common: CommonArgs) -> Result<Self> {
        let file = match &common.config {
            None => FileConfig::default(),
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::io(path.display().to_string(), e))?;
                toml::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
        };
        Ok(Self { common, file })
    }

    fn scheme(&self) -> Result<Scheme> {
        self.common
            .scheme
            .clone()
            .or_else(|| self.file.scheme.clone())
            .map_or(Ok(Scheme::Six), |s| s.parse())
    }

    fn strategy(&self) -> Result<Option<Strategy>> {
        self.common
            .strategy
            .clone()
            .or_else(|| self.file.strategy.clone())
            .map(|s| s.parse())
            .transpose()
    }

    fn rounding(&self) -> Result<Rounding> {
        self.common
            .rounding
            .clone()
            .or_else(|| self.file.rounding.clone())
            .map_or(Ok(Rounding::default()), |s| s.parse())
    }

    fn counting(&self) -> Counting {
        if self.common.dedupe_reduced || self.file.dedupe_reduced.unwrap_or(false) {
            Counting::Deduped
        } else {
            Counting::Incidence
        }
    }

    fn format(&self) -> Result<Option<Format>> {
        self.common
            .format
            .clone()
            .or_else(|| self.file.format.clone())
            .map(|s| s.parse())
            .transpose()
    }

    fn threshold(&self, flag: Option<f64>) -> Option<f64> {
        flag.or(self.file.threshold)
    }

    fn split_spec(&self, args: &SplitArgs, seed: Option<u64>, scheme: Scheme) -> Result<SplitSpec> {
        let seed = seed.ok_or_else(|| Error::Config("splitting needs --seed".into()))?;
        let mut spec = SplitSpec::new(seed);
        if let Some(f) = args.train_fraction.or(self.file.train_fraction) {
            spec.train_fraction = f;
            spec.test_fraction = 1.0 - f;
        }
        if let Some(v) = args.validation_fraction.or(self.file.validation_fraction) {
            spec.validation_of_train = v;
        }
        if args.stratify_by_scenario || self.file.stratify_by_scenario.unwrap_or(false) {
            spec.stratify_by_scenario = Some(scheme);
        }
        Ok(spec)
    }

    fn base(&self, subcommand: &str) -> Result<RunConfig> {
        Ok(RunConfig {
            tool: format!("agree-kit {}", env!("CARGO_PKG_VERSION")),
            subcommand: subcommand.to_string(),
            inputs: BTreeMap::new(),
            scheme: self.scheme()?,
            strategy: self.strategy()?,
            seed: self.common.seed.or(self.file.seed),
            rounding: self.rounding()?,
            counting: self.counting(),
            format: self.format()?,
            options: BTreeMap::new(),
            output_dir: self
                .common
                .output_dir
                .clone()
                .or_else(|| self.file.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("agree-kit-out")),
            quiet: self.common.quiet || self.file.quiet.unwrap_or(false),
        })
    }
}

fn load_dataset(path: &Path, format: Option<Format>) -> Result<Dataset> {
    let format = format
        .or_else(|| Format::from_path(path))
        .unwrap_or(Format::Jsonl);
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    pipeline::parse_bytes(&bytes, format, &path.display().to_string())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

struct Emitter {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Emitter {
    fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        }
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes)?;
        self.written.push(path);
        Ok(())
    }
}

fn to_value<T: Serialize>(v: T) -> Value {
    serde_json::to_value(v).expect("serializable option")
}

/// Executes one parsed command line.
pub fn run(cli: Cli) -> Result<RunOutcome> {
    let resolver = Resolver::new(cli.common.clone())?;
    let (cfg, mut out, summary) = match cli.command {
        Command::Parse { input } => {
            let mut cfg = resolver.base("parse")?;
            cfg.inputs
                .insert("annotations".into(), input.display().to_string());
            let ds = load_dataset(&input, cfg.format)?;
            let mut out = Emitter::new(&cfg.output_dir);
            out.write("dataset.jsonl", &pipeline::parse::to_jsonl(&ds.items))?;
            let records: usize = ds.items.iter().map(|i| i.num_annotators()).sum();
            let summary = json!({
                "source": ds.provenance.source,
                "format": ds.provenance.format,
                "content_hash": ds.provenance.content_hash,
                "items": ds.len(),
                "records": records,
            });
            out.write("parse_summary.json", &pretty_json(&summary))?;
            let text = format!("parsed {} items ({records} records)", ds.len());
            (cfg, out, text)
        }
        Command::Aggregate { input } => {
            let mut cfg = resolver.base("aggregate")?;
            cfg.inputs
                .insert("annotations".into(), input.display().to_string());
            let strategy = cfg.strategy.unwrap_or(Strategy::SIMPLE);
            cfg.strategy = Some(strategy);
            let ds = load_dataset(&input, cfg.format)?;
            let acfg = cfg.aggregate_config();
            let mut rows = Vec::new();
            let mut dropped = Vec::new();
            let mut scenarios: BTreeMap<ScenarioTag, usize> = BTreeMap::new();
            for item in &ds.items {
                match aggregate(item, cfg.scheme, strategy, &acfg) {
                    Ok(o) => {
                        *scenarios.entry(o.scenario).or_default() += 1;
                        rows.push(o);
                    }
                    Err(Error::Unresolvable { item_id, .. }) => dropped.push(item_id),
                    Err(e) => return Err(e),
                }
            }
            let mut out = Emitter::new(&cfg.output_dir);
            out.write("aggregated.jsonl", &jsonl(&rows))?;
            let summary = json!({
                "content_hash": ds.provenance.content_hash,
                "scheme": cfg.scheme,
                "strategy": strategy,
                "labelled": rows.len(),
                "scenarios": scenarios,
                "dropped_no_clear_majority": dropped,
            });
            out.write("aggregate_summary.json", &pretty_json(&summary))?;
            let text = format!(
                "aggregated {} items with {strategy} ({} dropped)",
                rows.len(),
                dropped.len()
            );
            (cfg, out, text)
        }
        Command::Split { input, split } => {
            let mut cfg = resolver.base("split")?;
            cfg.inputs
                .insert("annotations".into(), input.display().to_string());
            let spec = resolver.split_spec(&split, cfg.seed, cfg.scheme)?;
            cfg.options.insert("split".into(), to_value(spec));
            let ds = load_dataset(&input, cfg.format)?;
            let parts = pipeline::split(&ds, &spec)?;
            let mut out = Emitter::new(&cfg.output_dir);
            out.write("split_manifest.json", &pretty_json(&parts))?;
            let text = format!(
                "split {} items: {} train / {} validation / {} test",
                ds.len(),
                parts.train.len(),
                parts.validation.len(),
                parts.test.len()
            );
            (cfg, out, text)
        }
        Command::BuildExp {
            input,
            experiment,
            weighted,
            strength,
            train_subset,
            test_subset,
            split,
        } => {
            let mut cfg = resolver.base("build-exp")?;
            cfg.inputs
                .insert("annotations".into(), input.display().to_string());
            let id: ExperimentId = experiment.parse()?;
            let mut spec = ExperimentSpec::new(id, cfg.scheme);
            spec.strategy = cfg.strategy;
            spec.weighted = weighted;
            spec.strength = StrengthOptions {
                threshold: resolver
                    .threshold(strength.threshold)
                    .unwrap_or(DEFAULT_BINARIZE_THRESHOLD),
                train_subset: train_subset.map_or(Ok(StrengthSubset::All), |s| s.parse())?,
                test_subset: test_subset.map_or(Ok(StrengthSubset::All), |s| s.parse())?,
            };
            let split_spec = resolver.split_spec(&split, cfg.seed, cfg.scheme)?;
            cfg.options.insert("experiment".into(), to_value(&spec));
            cfg.options.insert("split".into(), to_value(split_spec));
            let ds = load_dataset(&input, cfg.format)?;
            let build =
                pipeline::build_experiment(&ds, &spec, &split_spec, &cfg.aggregate_config())?;
            let mut out = Emitter::new(&cfg.output_dir);
            out.write("train.jsonl", &build.train.to_jsonl())?;
            out.write("validation.jsonl", &build.validation.to_jsonl())?;
            out.write("test_gold.jsonl", &jsonl(&build.test.gold))?;
            out.write("test_silver.jsonl", &jsonl(&build.test.silver))?;
            if let Some(rows) = &build.test_strength {
                out.write("test_strength.jsonl", &jsonl(rows))?;
            }
            out.write("split_manifest.json", &pretty_json(&build.split))?;
            out.write("experiment_manifest.json", &pretty_json(&build.manifest))?;
            let c = build.manifest.counts;
            let text = format!(
                "{id}: {} train / {} validation / {} gold / {} silver",
                c.train, c.validation, c.test_gold, c.test_silver
            );
            (cfg, out, text)
        }
        Command::Stats { input } => {
            let mut cfg = resolver.base("stats")?;
            cfg.inputs
                .insert("annotations".into(), input.display().to_string());
            let strategy = cfg.strategy.unwrap_or(Strategy::SIMPLE);
            cfg.strategy = Some(strategy);
            let ds = load_dataset(&input, cfg.format)?;
            let report =
                pipeline::stats_report(&ds, cfg.scheme, strategy, &cfg.aggregate_config())?;
            let mut out = Emitter::new(&cfg.output_dir);
            out.write("stats.json", &pretty_json(&report))?;
            let text = report.render();
            out.write("stats.txt", text.as_bytes())?;
            let summary = format!(
                "{} items, disagreement {:.2}% ({})",
                report.n_items, report.disagreement_rate, cfg.scheme
            );
            (cfg, out, summary)
        }
        Command::Strength {
            input,
            strength,
            alpha,
            agreement_only,
            regression_scores,
            classifier_scores,
            split_manifest,
        } => {
            let mut cfg = resolver.base("strength")?;
            cfg.inputs
                .insert("annotations".into(), input.display().to_string());
            let threshold = resolver
                .threshold(strength.threshold)
                .unwrap_or(DEFAULT_BINARIZE_THRESHOLD);
            let alpha = alpha.or(resolver.file.alpha).unwrap_or(DEFAULT_ALPHA);
            cfg.options.insert("threshold".into(), to_value(threshold));
            cfg.options.insert("alpha".into(), to_value(alpha));
            cfg.options
                .insert("agreement_only".into(), to_value(agreement_only));
            let ds = load_dataset(&input, cfg.format)?;
            let items = if agreement_only {
                strength_agreement_subset(&ds.items)?
            } else {
                ds.items.clone()
            };
            let aggregates = items
                .iter()
                .map(|i| StrengthAggregate::from_item(i, threshold))
                .collect::<Result<Vec<_>>>()?;
            let strategy = cfg.strategy.unwrap_or(Strategy::SIMPLE);
            let acfg = cfg.aggregate_config();
            let mut outcomes = Vec::new();
            let mut profiled = Vec::new();
            for (item, agg) in items.iter().zip(&aggregates) {
                match aggregate(item, cfg.scheme, strategy, &acfg) {
                    Ok(o) => {
                        outcomes.push(o);
                        profiled.push(agg.clone());
                    }
                    Err(Error::Unresolvable { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
            let profile = class_strength_profile(&outcomes, &profiled, cfg.scheme)?;

            let mut out = Emitter::new(&cfg.output_dir);
            out.write("strength.jsonl", &jsonl(&aggregates))?;
            let mut ensemble = None;
            if let (Some(reg), Some(cls), Some(manifest)) =
                (&regression_scores, &classifier_scores, &split_manifest)
            {
                cfg.inputs
                    .insert("regression_scores".into(), reg.display().to_string());
                cfg.inputs
                    .insert("classifier_scores".into(), cls.display().to_string());
                cfg.inputs
                    .insert("split_manifest".into(), manifest.display().to_string());
                let (config, rows) = run_ensemble(&aggregates, reg, cls, manifest, alpha)?;
                out.write("ensemble_scores.jsonl", &jsonl(&rows))?;
                ensemble = Some(config);
            }
            let n_hate = aggregates.iter().filter(|a| a.binary_label == 1).count();
            let report = json!({
                "content_hash": ds.provenance.content_hash,
                "threshold": threshold,
                "alpha": alpha,
                "items": aggregates.len(),
                "hate": n_hate,
                "agreement_only": agreement_only,
                "profile_strategy": strategy,
                "profile": profile,
                "ensemble": ensemble,
            });
            out.write("strength_report.json", &pretty_json(&report))?;
            out.write("strength_report.txt", profile.render().as_bytes())?;
            let text = format!(
                "{} items, {n_hate} above threshold {threshold}",
                aggregates.len()
            );
            (cfg, out, text)
        }
        Command::Eval {
            mode,
            predictions,
            predictions_b,
            gold,
            threshold,
            validation_predictions,
            validation_gold,
            label,
        } => {
            let mut cfg = resolver.base("eval")?;
            cfg.inputs
                .insert("predictions".into(), predictions.display().to_string());
            cfg.inputs.insert("gold".into(), gold.display().to_string());
            cfg.options.insert("mode".into(), to_value(&mode));
            let preds = parse_predictions(&read_text(&predictions)?)?;
            let gold_rows = parse_gold(&read_text(&gold)?)?;
            let mut out = Emitter::new(&cfg.output_dir);
            let report = match mode.as_str() {
                "classify" => evaluate_classification(&preds, &gold_rows.labels()?, cfg.scheme)?,
                "average" => {
                    let b = predictions_b.ok_or_else(|| {
                        Error::Config("--mode average needs --predictions-b".into())
                    })?;
                    cfg.inputs
                        .insert("predictions_b".into(), b.display().to_string());
                    let other = parse_predictions(&read_text(&b)?)?;
                    let averaged = average_predictions(&preds, &other)?;
                    out.write("averaged_predictions.jsonl", &prediction_rows(&averaged))?;
                    evaluate_classification(&averaged, &gold_rows.labels()?, cfg.scheme)?
                }
                "regression" | "threshold" => {
                    let t = match (
                        threshold.or(resolver.file.threshold),
                        &validation_predictions,
                    ) {
                        (Some(t), _) => t,
                        (None, Some(vp)) => {
                            let vg = validation_gold.as_ref().expect("clap enforces");
                            cfg.inputs
                                .insert("validation_predictions".into(), vp.display().to_string());
                            cfg.inputs
                                .insert("validation_gold".into(), vg.display().to_string());
                            let vpreds = parse_predictions(&read_text(vp)?)?;
                            let vgold = parse_gold(&read_text(vg)?)?.binary()?;
                            let (scores, labels) = aligned_scores(&vpreds, &vgold)?;
                            let choice = select_threshold(&scores, &labels)?;
                            cfg.options.insert(
                                "validation_accuracy".into(),
                                to_value(100.0 * choice.accuracy),
                            );
                            choice.threshold
                        }
                        (None, None) => return Err(Error::Config(
                            "thresholded evaluation needs --threshold or --validation-predictions"
                                .into(),
                        )),
                    };
                    cfg.options.insert("threshold".into(), to_value(t));
                    let mut report = evaluate_thresholded(&preds, t, &gold_rows.binary()?)?;
                    if mode == "regression" {
                        report.rmse = Some(evaluate_regression(&preds, &gold_rows.strengths()?)?);
                    }
                    report
                }
                other => return Err(Error::Config(format!("unknown eval mode {other}"))),
            };
            out.write("eval_report.json", &pretty_json(&report))?;
            let text = report.render(&label);
            out.write("eval_report.txt", text.as_bytes())?;
            (cfg, out, eval_summary(&report))
        }
    };
    out.write("run_config.json", &pretty_json(&cfg))?;
    if !cfg.quiet {
        println!("{summary}");
    }
    Ok(RunOutcome {
        artifacts: out.written,
        summary,
    })
}

fn eval_summary(r: &EvalReport) -> String {
    let mut s = format!("n={} M-F1={:.2} Acc.={:.2}", r.n, r.macro_f1, r.accuracy);
    if let Some(rmse) = r.rmse {
        s.push_str(&format!(" RMSE={rmse:.2}"));
    }
    s
}

fn prediction_rows(p: &PredictionSet) -> Vec<u8> {
    let rows: Vec<Value> = p
        .iter()
        .map(|(id, pred)| {
            let mut v = to_value(pred);
            v.as_object_mut()
                .expect("prediction is an object")
                .insert("item_id".into(), Value::String(id.clone()));
            v
        })
        .collect();
    jsonl(&rows)
}

/// Gold rows as written by `aggregate`, `build-exp` or `strength`.
struct GoldRows(Vec<(String, Value)>);

fn parse_gold(text: &str) -> Result<GoldRows> {
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(raw).map_err(|e| Error::Parse {
            line: idx + 1,
            message: format!("gold row: {e}"),
        })?;
        let id = v
            .get("item_id")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Parse {
                line: idx + 1,
                message: "gold row without item_id".into(),
            })?
            .to_string();
        rows.push((id, v));
    }
    Ok(GoldRows(rows))
}

impl GoldRows {
    fn field<T>(&self, name: &str, f: impl Fn(&Value) -> Option<T>) -> Result<Vec<(String, T)>> {
        self.0
            .iter()
            .map(|(id, v)| {
                v.get(name)
                    .and_then(&f)
                    .map(|x| (id.clone(), x))
                    .ok_or_else(|| {
                        Error::Contract(format!("gold item {id} has no usable {name:?}"))
                    })
            })
            .collect()
    }

    fn labels(&self) -> Result<Vec<(String, ClassLabel)>> {
        self.field("label", |v| {
            v.as_u64()
                .and_then(|l| u8::try_from(l).ok())
                .map(ClassLabel)
        })
    }

    fn binary(&self) -> Result<Vec<(String, u8)>> {
        let key = if self.0.iter().all(|(_, v)| v.get("binary_label").is_some()) {
            "binary_label"
        } else {
            "label"
        };
        self.field(key, |v| v.as_u64().and_then(|l| u8::try_from(l).ok()))
    }

    fn strengths(&self) -> Result<Vec<(String, f64)>> {
        self.field("mean_strength", |v| match v {
            Value::Number(n) => n.as_f64(),
            Value::Object(o) => {
                let num = o.get("num")?.as_f64()?;
                let den = o.get("den")?.as_f64()?;
                (den > 0.0).then(|| num / den)
            }
            _ => None,
        })
    }
}

fn aligned_scores(preds: &PredictionSet, gold: &[(String, u8)]) -> Result<(Vec<f64>, Vec<u8>)> {
    let missing: Vec<String> = gold
        .iter()
        .filter(|(id, _)| !preds.contains_key(id))
        .map(|(id, _)| id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Coverage {
            what: "validation scores".into(),
            missing,
            extra: Vec::new(),
        });
    }
    let mut scores = Vec::with_capacity(gold.len());
    for (id, _) in gold {
        scores.push(score_of(id, &preds[id])?);
    }
    Ok((scores, gold.iter().map(|(_, l)| *l).collect()))
}

/// A scalar hate score: `score`, or the positive-class entry of a
/// two-element `scores` vector.
fn score_of(id: &str, p: &Prediction) -> Result<f64> {
    match p {
        Prediction::Score { score } => Ok(*score),
        Prediction::Scores { scores } if scores.len() == 2 => Ok(scores[1]),
        _ => Err(Error::Contract(format!(
            "item {id}: expected a scalar score"
        ))),
    }
}

#[derive(Serialize)]
struct ScoreRow<'a> {
    item_id: &'a str,
    score: f64,
}

fn run_ensemble<'a>(
    aggregates: &'a [StrengthAggregate],
    reg_path: &Path,
    cls_path: &Path,
    manifest_path: &Path,
    alpha: f64,
) -> Result<(Value, Vec<ScoreRow<'a>>)> {
    let reg = parse_predictions(&read_text(reg_path)?)?;
    let cls = parse_predictions(&read_text(cls_path)?)?;
    let manifest: Split = serde_json::from_str(&read_text(manifest_path)?)
        .map_err(|e| Error::Config(format!("{}: {e}", manifest_path.display())))?;
    let by_id: HashMap<&str, &StrengthAggregate> =
        aggregates.iter().map(|a| (a.item_id.as_str(), a)).collect();

    let unknown: Vec<String> = manifest
        .validation
        .iter()
        .filter(|id| !by_id.contains_key(id.as_str()))
        .cloned()
        .collect();
    if !unknown.is_empty() {
        return Err(Error::Join { ids: unknown });
    }
    let val_gold: Vec<(String, u8)> = manifest
        .validation
        .iter()
        .map(|id| (id.clone(), by_id[id.as_str()].binary_label))
        .collect();
    let (val_reg, labels) = aligned_scores(&reg, &val_gold)?;
    let (val_cls, _) = aligned_scores(&cls, &val_gold)?;
    let reg_bounds = NormBounds::fit(&val_reg)?;
    let cls_bounds = NormBounds::fit(&val_cls)?;
    let combine = |r: f64, c: f64| {
        crate::strength::ensemble_score(reg_bounds.apply(r), cls_bounds.apply(c), alpha)
    };
    let val_scores = val_reg
        .iter()
        .zip(&val_cls)
        .map(|(&r, &c)| combine(r, c))
        .collect::<Result<Vec<_>>>()?;
    let choice = select_threshold(&val_scores, &labels)?;

    let missing: Vec<String> = reg
        .keys()
        .filter(|id| !cls.contains_key(*id))
        .chain(cls.keys().filter(|id| !reg.contains_key(*id)))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::Coverage {
            what: "ensemble score files".into(),
            missing,
            extra: Vec::new(),
        });
    }
    let mut rows = Vec::new();
    for (id, p) in &reg {
        let agg = by_id.get(id.as_str()).ok_or_else(|| Error::Join {
            ids: vec![id.clone()],
        })?;
        rows.push(ScoreRow {
            item_id: &agg.item_id,
            score: combine(score_of(id, p)?, score_of(id, &cls[id])?)?,
        });
    }
    let config = EnsembleConfig {
        alpha,
        regression_bounds: reg_bounds,
        classifier_bounds: cls_bounds,
        decision_threshold: choice.threshold,
        fitted_on: "validation".into(),
    };
    let mut v = to_value(config);
    v.as_object_mut().expect("object").insert(
        "validation_accuracy".into(),
        to_value(100.0 * choice.accuracy),
    );
    Ok((v, rows))
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    class: &'a str,
    message: String,
    ids: Vec<String>,
}

/// Parses `args`, runs, and returns the process exit status. Errors go to
/// stderr as one line.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let json_errors = cli.common.json_errors;
    match run(cli) {
        Ok(_) => 0,
        Err(err) => {
            let class = err.class();
            let message = err.to_string().replace('\n', " ");
            let mut stderr = std::io::stderr().lock();
            if json_errors {
                let report = ErrorReport {
                    class: class.as_str(),
                    message,
                    ids: err.offending_ids(),
                };
                let _ = writeln!(stderr, "{}", serde_json::to_string(&report).expect("json"));
            } else {
                let _ = writeln!(stderr, "error[{class}]: {message}");
            }
            class.exit_code()
        }
    }
}
