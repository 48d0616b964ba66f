//! Scoring of externally produced predictions.
//!
//! Conventions: metrics are percentages; macro-F1 averages over classes that
//! occur in the gold labels (a gold class that is never predicted scores
//! F1 = 0, a class absent from gold is left out); argmax ties on score
//! vectors go to the lower class index.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scheme::{ClassLabel, Scheme};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Prediction {
    Label { label: i64 },
    Scores { scores: Vec<f64> },
    Score { score: f64 },
}

/// Predictions keyed by item id.
pub type PredictionSet = BTreeMap<String, Prediction>;

#[derive(Deserialize)]
struct PredictionRow {
    item_id: String,
    #[serde(flatten)]
    prediction: Prediction,
}

/// Reads JSONL rows of `{"item_id", "label"}`, `{"item_id", "scores"}` or
/// `{"item_id", "score"}`.
pub fn parse_predictions(text: &str) -> Result<PredictionSet> {
    let mut out = PredictionSet::new();
    for (idx, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let line = idx + 1;
        let row: PredictionRow = serde_json::from_str(raw).map_err(|e| Error::Parse {
            line,
            message: format!("prediction row: {e}"),
        })?;
        if out.insert(row.item_id.clone(), row.prediction).is_some() {
            return Err(Error::Parse {
                line,
                message: format!("item {} predicted twice", row.item_id),
            });
        }
    }
    Ok(out)
}

/// First index of the maximum; NaN never wins.
pub fn argmax(scores: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s.is_nan() {
            continue;
        }
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i)
}

fn check_coverage<'a>(
    what: &str,
    predicted: impl Iterator<Item = &'a str>,
    gold: impl Iterator<Item = &'a str>,
) -> Result<()> {
    let p: BTreeSet<&str> = predicted.collect();
    let mut g = BTreeSet::new();
    for id in gold {
        if !g.insert(id) {
            return Err(Error::Contract(format!(
                "{what}: gold item {id} listed twice"
            )));
        }
    }
    let missing: Vec<String> = g.difference(&p).map(|s| s.to_string()).collect();
    let extra: Vec<String> = p.difference(&g).map(|s| s.to_string()).collect();
    if missing.is_empty() && extra.is_empty() {
        Ok(())
    } else {
        Err(Error::Coverage {
            what: what.to_string(),
            missing,
            extra,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: u8,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    pub predicted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub scheme: Scheme,
    pub zero_support: String,
    pub argmax_ties: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

impl EvalConfig {
    fn new(scheme: Scheme, threshold: Option<f64>) -> Self {
        Self {
            scheme,
            zero_support: "excluded from macro average".into(),
            argmax_ties: "lower class index".into(),
            threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    /// Percent.
    pub accuracy: f64,
    /// Percent.
    pub macro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rmse: Option<f64>,
    pub config: EvalConfig,
}

impl EvalReport {
    /// A `M-F1 | Acc.` row with two decimals.
    pub fn table_row(&self, label: &str) -> String {
        format!(
            "{label:<24} | {:>6.2} | {:>6.2} |",
            self.macro_f1, self.accuracy
        )
    }

    pub fn render(&self, label: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<24} | {:>6} | {:>6} |", "", "M-F1", "Acc.");
        let _ = writeln!(out, "{}", self.table_row(label));
        if let Some(r) = self.rmse {
            let _ = writeln!(out, "RMSE: {r:.2}");
        }
        let _ = writeln!(out, "n = {} ({} scheme)", self.n, self.config.scheme);
        let _ = writeln!(out, "class  precision  recall     f1  support");
        for c in &self.per_class {
            let _ = writeln!(
                out,
                "{:>5}  {:>9.2}  {:>6.2}  {:>5.2}  {:>7}",
                c.label, c.precision, c.recall, c.f1, c.support
            );
        }
        out
    }
}

/// Accuracy and macro-F1 over paired (gold, predicted) labels.
pub fn score_labels(pairs: &[(ClassLabel, ClassLabel)], scheme: Scheme) -> EvalReport {
    let k = scheme.num_classes();
    let mut confusion = vec![vec![0usize; k]; k];
    for &(g, p) in pairs {
        confusion[g.index()][p.index()] += 1;
    }
    let n = pairs.len();
    let correct: usize = (0..k).map(|c| confusion[c][c]).sum();
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|c| {
            let tp = confusion[c][c];
            let support: usize = confusion[c].iter().sum();
            let predicted: usize = confusion.iter().map(|row| row[c]).sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassMetrics {
                label: c as u8,
                precision: 100.0 * precision,
                recall: 100.0 * recall,
                f1: 100.0 * f1,
                support,
                predicted,
            }
        })
        .collect();
    let present: Vec<&ClassMetrics> = per_class.iter().filter(|c| c.support > 0).collect();
    let macro_f1 = if present.is_empty() {
        0.0
    } else {
        present.iter().map(|c| c.f1).sum::<f64>() / present.len() as f64
    };
    EvalReport {
        n,
        accuracy: 100.0 * ratio(correct, n),
        macro_f1,
        per_class,
        rmse: None,
        config: EvalConfig::new(scheme, None),
    }
}

fn predicted_label(id: &str, p: &Prediction, scheme: Scheme) -> Result<ClassLabel> {
    match p {
        Prediction::Label { label } => scheme.validate(*label),
        Prediction::Scores { scores } => {
            if scores.len() != scheme.num_classes() {
                return Err(Error::Contract(format!(
                    "item {id}: {} scores for a {}-class scheme",
                    scores.len(),
                    scheme.num_classes()
                )));
            }
            argmax(scores)
                .map(|i| ClassLabel(i as u8))
                .ok_or_else(|| Error::Contract(format!("item {id}: all scores are NaN")))
        }
        Prediction::Score { .. } => Err(Error::Contract(format!(
            "item {id}: a strength score cannot be scored as a class prediction"
        ))),
    }
}

pub fn evaluate_classification(
    preds: &PredictionSet,
    gold: &[(String, ClassLabel)],
    scheme: Scheme,
) -> Result<EvalReport> {
    check_coverage(
        "classification",
        preds.keys().map(String::as_str),
        gold.iter().map(|(id, _)| id.as_str()),
    )?;
    let pairs = gold
        .iter()
        .map(|(id, g)| {
            if g.index() >= scheme.num_classes() {
                return Err(Error::InvalidLabel {
                    value: g.0 as i64,
                    scheme: scheme.name(),
                });
            }
            Ok((*g, predicted_label(id, &preds[id], scheme)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(score_labels(&pairs, scheme))
}

fn strength_scores(preds: &PredictionSet) -> Result<BTreeMap<&str, f64>> {
    preds
        .iter()
        .map(|(id, p)| match p {
            Prediction::Score { score } => Ok((id.as_str(), *score)),
            _ => Err(Error::Contract(format!(
                "item {id}: expected a real-valued score"
            ))),
        })
        .collect()
}

/// Root mean squared error on the strength scale.
pub fn evaluate_regression(preds: &PredictionSet, gold: &[(String, f64)]) -> Result<f64> {
    check_coverage(
        "regression",
        preds.keys().map(String::as_str),
        gold.iter().map(|(id, _)| id.as_str()),
    )?;
    if gold.is_empty() {
        return Err(Error::Contract("regression needs at least one item".into()));
    }
    let scores = strength_scores(preds)?;
    let sse: f64 = gold
        .iter()
        .map(|(id, g)| (scores[id.as_str()] - g).powi(2))
        .sum();
    Ok((sse / gold.len() as f64).sqrt())
}

/// Binarizes scores with a strict `>` and scores them as a two-class task.
pub fn evaluate_thresholded(
    preds: &PredictionSet,
    threshold: f64,
    gold: &[(String, u8)],
) -> Result<EvalReport> {
    check_coverage(
        "thresholded",
        preds.keys().map(String::as_str),
        gold.iter().map(|(id, _)| id.as_str()),
    )?;
    let scores = strength_scores(preds)?;
    let pairs = gold
        .iter()
        .map(|(id, g)| {
            if *g > 1 {
                return Err(Error::InvalidLabel {
                    value: *g as i64,
                    scheme: Scheme::Two.name(),
                });
            }
            Ok((
                ClassLabel(*g),
                ClassLabel(u8::from(scores[id.as_str()] > threshold)),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = score_labels(&pairs, Scheme::Two);
    report.config.threshold = Some(threshold);
    Ok(report)
}

/// Elementwise mean of two score-vector prediction sets.
pub fn average_predictions(a: &PredictionSet, b: &PredictionSet) -> Result<PredictionSet> {
    check_coverage(
        "averaging",
        a.keys().map(String::as_str),
        b.keys().map(String::as_str),
    )?;
    a.iter()
        .map(|(id, pa)| match (pa, &b[id]) {
            (Prediction::Scores { scores: x }, Prediction::Scores { scores: y }) => {
                if x.len() != y.len() {
                    return Err(Error::Contract(format!(
                        "item {id}: score vectors of length {} and {}",
                        x.len(),
                        y.len()
                    )));
                }
                let scores = x.iter().zip(y).map(|(p, q)| (p + q) / 2.0).collect();
                Ok((id.clone(), Prediction::Scores { scores }))
            }
            _ => Err(Error::Contract(format!(
                "item {id}: averaging needs score vectors"
            ))),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn case(gold: &[u8], pred: &[u8], scheme: Scheme) -> EvalReport {
        let g: Vec<_> = gold
            .iter()
            .enumerate()
            .map(|(i, &l)| (format!("i{i}"), ClassLabel(l)))
            .collect();
        let p: PredictionSet = pred
            .iter()
            .enumerate()
            .map(|(i, &l)| (format!("i{i}"), Prediction::Label { label: l as i64 }))
            .collect();
        evaluate_classification(&p, &g, scheme).unwrap()
    }

    #[test]
    fn perfect_predictions() {
        let r = case(&[0, 1, 2, 3, 3], &[0, 1, 2, 3, 3], Scheme::Four);
        assert_eq!((r.accuracy, r.macro_f1), (100.0, 100.0));
    }

    #[test]
    fn two_class_fixture() {
        let r = case(&[1, 1, 0, 0], &[1, 0, 0, 0], Scheme::Two);
        assert_eq!(format!("{:.2}", r.accuracy), "75.00");
        assert_eq!(format!("{:.2}", r.macro_f1), "73.33");
        // class 1: P=1 R=1/2 F1=2/3 ; class 0: P=2/3 R=1 F1=4/5
        assert!((r.macro_f1 - 100.0 * (2.0 / 3.0 + 0.8) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_predictor() {
        let r = case(&[1, 1, 0, 0], &[0, 0, 0, 0], Scheme::Two);
        assert_eq!(r.accuracy, 50.0);
        assert_eq!(r.per_class[1].f1, 0.0);
    }

    #[test]
    fn zero_support_classes_are_excluded() {
        // classes 2..5 never occur in gold
        let r = case(&[0, 1], &[0, 1], Scheme::Six);
        assert_eq!(r.macro_f1, 100.0);
        // a predicted-only class does not enter the average
        let r = case(&[0, 0], &[0, 3], Scheme::Six);
        assert!((r.macro_f1 - 100.0 * 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn coverage_errors_list_ids() {
        let g = vec![
            ("a".to_string(), ClassLabel(0)),
            ("b".to_string(), ClassLabel(1)),
        ];
        let p: PredictionSet = [
            ("a".to_string(), Prediction::Label { label: 0 }),
            ("c".to_string(), Prediction::Label { label: 0 }),
        ]
        .into_iter()
        .collect();
        match evaluate_classification(&p, &g, Scheme::Two) {
            Err(Error::Coverage { missing, extra, .. }) => {
                assert_eq!(missing, ["b"]);
                assert_eq!(extra, ["c"]);
            }
            other => panic!("{other:?}"),
        }
    }

    fn scores(v: &[(&str, f64)]) -> PredictionSet {
        v.iter()
            .map(|(id, s)| (id.to_string(), Prediction::Score { score: *s }))
            .collect()
    }

    #[test]
    fn regression_examples() {
        let gold = vec![("a".to_string(), 0.0), ("b".to_string(), 10.0)];
        assert_eq!(
            evaluate_regression(&scores(&[("a", 0.0), ("b", 10.0)]), &gold).unwrap(),
            0.0
        );
        assert_eq!(
            evaluate_regression(&scores(&[("a", 1.0), ("b", 9.0)]), &gold).unwrap(),
            1.0
        );
    }

    #[test]
    fn thresholded_examples() {
        let gold = vec![("a".to_string(), 1), ("b".to_string(), 0)];
        let r = evaluate_thresholded(&scores(&[("a", 0.9), ("b", 0.1)]), 0.5, &gold).unwrap();
        assert_eq!(r.accuracy, 100.0);
        let r = evaluate_thresholded(&scores(&[("a", 0.5), ("b", 0.1)]), 0.5, &gold).unwrap();
        assert_eq!(r.accuracy, 50.0);
        assert_eq!(r.config.threshold, Some(0.5));
    }

    #[test]
    fn averaging() {
        let a: PredictionSet = [(
            "x".to_string(),
            Prediction::Scores {
                scores: vec![1.0, 0.0],
            },
        )]
        .into();
        let b: PredictionSet = [(
            "x".to_string(),
            Prediction::Scores {
                scores: vec![0.0, 1.0],
            },
        )]
        .into();
        let avg = average_predictions(&a, &b).unwrap();
        assert_eq!(
            avg["x"],
            Prediction::Scores {
                scores: vec![0.5, 0.5]
            }
        );
        let Prediction::Scores { scores } = &avg["x"] else {
            panic!()
        };
        assert_eq!(argmax(scores), Some(0));
        assert_eq!(average_predictions(&a, &a).unwrap(), a);
        let c: PredictionSet = [(
            "x".to_string(),
            Prediction::Scores {
                scores: vec![0.0, 1.0, 0.0],
            },
        )]
        .into();
        assert!(average_predictions(&a, &c).is_err());
    }

    #[test]
    fn parses_all_prediction_shapes() {
        let p = parse_predictions(
            "{\"item_id\":\"a\",\"label\":2}\n{\"item_id\":\"b\",\"scores\":[0.1,0.9]}\n{\"item_id\":\"c\",\"score\":3.5}\n",
        )
        .unwrap();
        assert_eq!(p["a"], Prediction::Label { label: 2 });
        assert_eq!(
            p["b"],
            Prediction::Scores {
                scores: vec![0.1, 0.9]
            }
        );
        assert_eq!(p["c"], Prediction::Score { score: 3.5 });
        assert!(parse_predictions(
            "{\"item_id\":\"a\",\"label\":1}\n{\"item_id\":\"a\",\"label\":1}"
        )
        .is_err());
        assert!(parse_predictions("{\"item_id\":\"a\"}").is_err());
    }
}
