//! Confusion counts, scalar metrics, ROC/AUC, threshold sweeps and report
//! files. PD is the positive class.

mod plot;
pub mod report;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::Label;

pub use report::{emit_report, EvalReport, ReferenceFigures, StageSummary};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::invalid(format!("{a} predictions for {b} truths")));
    }
    if a == 0 {
        return Err(Error::invalid("no predictions"));
    }
    Ok(())
}

pub fn confusion(preds: &[Label], truths: &[Label]) -> Result<ConfusionMatrix> {
    check_lengths(preds.len(), truths.len())?;
    let mut m = ConfusionMatrix::default();
    for (p, t) in preds.iter().zip(truths) {
        match (p, t) {
            (Label::Pd, Label::Pd) => m.tp += 1,
            (Label::Hc, Label::Hc) => m.tn += 1,
            (Label::Pd, Label::Hc) => m.fp += 1,
            (Label::Hc, Label::Pd) => m.fn_ += 1,
            _ => return Err(Error::invalid("unlabeled entry in predictions or truths")),
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub f1: f64,
    pub fpr: f64,
    /// Metrics whose denominator was zero and were set to 0.
    pub zero_denominator: Vec<String>,
}

/// `num / den`, or 0 with a flag when `den` is 0.
fn ratio(num: u64, den: u64, name: &str, flags: &mut Vec<String>) -> f64 {
    if den == 0 {
        flags.push(name.to_string());
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Accuracy is `(TP + TN) / total`. FPR is `1 - specificity`, which keeps
/// `fpr + specificity == 1` exact in floating point.
pub fn scalar_metrics(m: &ConfusionMatrix) -> Result<ScalarMetrics> {
    if m.total() == 0 {
        return Err(Error::invalid("empty confusion matrix"));
    }
    let mut flags = Vec::new();
    let accuracy = (m.tp + m.tn) as f64 / m.total() as f64;
    let precision = ratio(m.tp, m.tp + m.fp, "precision", &mut flags);
    let recall = ratio(m.tp, m.tp + m.fn_, "recall", &mut flags);
    let specificity = ratio(m.tn, m.tn + m.fp, "specificity", &mut flags);
    // 2TP / (2TP + FP + FN) is the harmonic mean of precision and recall,
    // computed from counts so it is exact for every matrix.
    let f1 = if m.tp > 0 {
        (2 * m.tp) as f64 / (2 * m.tp + m.fp + m.fn_) as f64
    } else {
        flags.push("f1".into());
        0.0
    };
    Ok(ScalarMetrics {
        accuracy,
        precision,
        recall,
        specificity,
        f1,
        fpr: 1.0 - specificity,
        zero_denominator: flags,
    })
}

/// ROC points for thresholds `+inf` followed by the distinct scores in
/// descending order; a sample is predicted positive when `score >= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<(f64, f64)>,
    pub thresholds: Vec<f64>,
}

/// Positive and negative totals, rejecting single-class or non-finite input.
fn class_totals(scores: &[f64], truths: &[Label], positive: Label) -> Result<(u64, u64)> {
    check_lengths(scores.len(), truths.len())?;
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("score {s}")));
    }
    let pos = truths.iter().filter(|&&t| t == positive).count() as u64;
    let neg = truths.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::ClassStarvation("ROC needs both classes in the truth set".into()));
    }
    Ok((pos, neg))
}

/// `(threshold, tp, fp)` at `+inf` and at each distinct score, descending.
fn sweep_counts(scores: &[f64], truths: &[Label], positive: Label) -> Vec<(f64, u64, u64)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut out = vec![(f64::INFINITY, 0, 0)];
    let (mut tp, mut fp) = (0, 0);
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        while k < order.len() && scores[order[k]] == s {
            if truths[order[k]] == positive {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        out.push((s, tp, fp));
    }
    out
}

pub fn roc_curve(scores: &[f64], truths: &[Label], positive: Label) -> Result<RocCurve> {
    let (pos, neg) = class_totals(scores, truths, positive)?;
    let counts = sweep_counts(scores, truths, positive);
    Ok(RocCurve {
        points: counts.iter().map(|&(_, tp, fp)| (fp as f64 / neg as f64, tp as f64 / pos as f64)).collect(),
        thresholds: counts.iter().map(|&(t, _, _)| t).collect(),
    })
}

/// Trapezoidal area: sum of `(y1 + y2) * (x2 - x1) / 2` over consecutive points.
pub fn auc(curve: &RocCurve) -> Result<f64> {
    if curve.points.len() < 2 {
        return Err(Error::invalid("ROC curve needs at least two points"));
    }
    Ok(curve
        .points
        .windows(2)
        .map(|w| (w[0].1 + w[1].1) * (w[1].0 - w[0].0) / 2.0)
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1 at every ROC threshold, PD positive.
pub fn threshold_sweep(scores: &[f64], truths: &[Label]) -> Result<Vec<SweepRow>> {
    let (pos, neg) = class_totals(scores, truths, Label::Pd)?;
    sweep_counts(scores, truths, Label::Pd)
        .into_iter()
        .map(|(threshold, tp, fp)| {
            let m = ConfusionMatrix {
                tp,
                fp,
                fn_: pos - tp,
                tn: neg - fp,
            };
            let s = scalar_metrics(&m)?;
            Ok(SweepRow {
                threshold,
                precision: s.precision,
                recall: s.recall,
                f1: s.f1,
            })
        })
        .collect()
}
