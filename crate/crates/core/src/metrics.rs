//! Binary classification metrics.
//!
//! A row is predicted positive iff its score is strictly greater than the
//! threshold. Metrics whose denominator is zero are `None` and serialize as
//! JSON `null`. AUC-ROC is the Mann-Whitney statistic with ties counted as
//! one half, computed from midranks.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

fn is_positive(y: f64) -> bool {
    y == 1.0
}

pub fn confusion(labels: &[f64], probs: &[f64], threshold: f64) -> Result<ConfusionCounts> {
    if labels.len() != probs.len() {
        return Err(Error::data(format!(
            "{} labels but {} scores",
            labels.len(),
            probs.len()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (&y, &p) in labels.iter().zip(probs) {
        match (is_positive(y), p > threshold) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (true, false) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn precision(c: &ConfusionCounts) -> Option<f64> {
    ratio(c.tp, c.tp + c.fp)
}

pub fn recall(c: &ConfusionCounts) -> Option<f64> {
    ratio(c.tp, c.tp + c.fn_)
}

pub fn f1(c: &ConfusionCounts) -> Option<f64> {
    let (p, r) = (precision(c)?, recall(c)?);
    if p + r == 0.0 {
        Some(0.0)
    } else {
        Some(2.0 * p * r / (p + r))
    }
}

pub fn accuracy(c: &ConfusionCounts) -> f64 {
    (c.tp + c.tn) as f64 / c.total().max(1) as f64
}

/// Area under the ROC curve via midranks. Errors unless both classes occur.
pub fn auc_roc(labels: &[f64], probs: &[f64]) -> Result<f64> {
    if labels.len() != probs.len() {
        return Err(Error::data("labels and scores differ in length"));
    }
    let n_pos = labels.iter().filter(|&&y| is_positive(y)).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::data("AUC-ROC needs both classes"));
    }
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[a].total_cmp(&probs[b]));
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && probs[order[j + 1]] == probs[order[i]] {
            j += 1;
        }
        // ranks are 1-based: the group spans ranks i+1 ..= j+1
        let midrank = (i + j + 2) as f64 / 2.0;
        let group_pos = order[i..=j].iter().filter(|&&k| is_positive(labels[k])).count();
        pos_rank_sum += midrank * group_pos as f64;
        i = j + 1;
    }
    let (np, nn) = (n_pos as f64, n_neg as f64);
    Ok((pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub auc_roc: Option<f64>,
    pub threshold: f64,
    pub confusion: ConfusionCounts,
    pub n_pos: u64,
    pub n_neg: u64,
}

pub fn build_report(labels: &[f64], probs: &[f64], threshold: f64) -> Result<MetricsReport> {
    if labels.is_empty() {
        return Err(Error::data("cannot build a report on zero rows"));
    }
    let c = confusion(labels, probs, threshold)?;
    Ok(MetricsReport {
        accuracy: accuracy(&c),
        precision: precision(&c),
        recall: recall(&c),
        f1: f1(&c),
        auc_roc: auc_roc(labels, probs).ok(),
        threshold,
        confusion: c,
        n_pos: c.tp + c.fn_,
        n_neg: c.fp + c.tn,
    })
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{:.2}", 100.0 * v))
}

fn auc_text(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3}"))
}

impl MetricsReport {
    /// Two-column table in the layout of a single-model results sheet.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<12}{:>14}", "Index", "Test Results");
        let rows = [
            ("Accuracy", format!("{}%", pct(Some(self.accuracy)))),
            ("Precision", format!("{}%", pct(self.precision))),
            ("Recall", format!("{}%", pct(self.recall))),
            ("F1-Score", format!("{}%", pct(self.f1))),
            ("AUC-ROC", auc_text(self.auc_roc)),
        ];
        for (name, value) in rows {
            let _ = writeln!(s, "{name:<12}{value:>14}");
        }
        let c = &self.confusion;
        let _ = writeln!(
            s,
            "threshold {:.6}  TP {}  FP {}  FN {}  TN {}",
            self.threshold, c.tp, c.fp, c.fn_, c.tn
        );
        s
    }
}

/// One row of a model comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub auc_roc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ComparisonRow {
    pub fn from_report(model: &str, r: &MetricsReport) -> Self {
        ComparisonRow {
            model: model.to_string(),
            accuracy: Some(r.accuracy),
            precision: r.precision,
            recall: r.recall,
            f1: r.f1,
            auc_roc: r.auc_roc,
            error: None,
        }
    }

    pub fn failed(model: &str, error: String) -> Self {
        ComparisonRow {
            model: model.to_string(),
            accuracy: None,
            precision: None,
            recall: None,
            f1: None,
            auc_roc: None,
            error: Some(error),
        }
    }
}

/// Model comparison with columns Accuracy, Precision, Recall, F1-Score (all
/// in percent) and AUC-ROC.
pub fn comparison_table(rows: &[ComparisonRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<12}{:>14}{:>15}{:>12}{:>14}{:>9}",
        "Model", "Accuracy (%)", "Precision (%)", "Recall (%)", "F1-Score (%)", "AUC-ROC"
    );
    for r in rows {
        if let Some(err) = &r.error {
            let _ = writeln!(s, "{:<12}  failed: {err}", r.model);
            continue;
        }
        let _ = writeln!(
            s,
            "{:<12}{:>14}{:>15}{:>12}{:>14}{:>9}",
            r.model,
            pct(r.accuracy),
            pct(r.precision),
            pct(r.recall),
            pct(r.f1),
            auc_text(r.auc_roc)
        );
    }
    s
}
