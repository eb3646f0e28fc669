use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::plot::{line_chart, Series, COLORS};
use super::{auc, confusion, roc_curve, scalar_metrics, threshold_sweep, ConfusionMatrix, RocCurve, ScalarMetrics, SweepRow};
use crate::custnet::{EpochRecord, History};
use crate::error::{Error, Result};
use crate::label::Label;

pub const METRICS_SCHEMA: &str = "custnetgc.metrics/1";

/// Published figures to print next to the computed ones, keyed by metric
/// name (`accuracy`, `precision`, `recall`, `specificity`, `f1`, `fpr`).
pub type ReferenceFigures = BTreeMap<String, f64>;

/// Counts, scalar metrics and per-class AUC of one classifier stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    #[serde(flatten)]
    pub matrix: ConfusionMatrix,
    #[serde(flatten)]
    pub metrics: ScalarMetrics,
    /// One-vs-rest AUC keyed by class name.
    pub auc: BTreeMap<String, f64>,
}

impl StageSummary {
    /// `pd_scores` and `hc_scores` are each class's own score; PD is
    /// predicted when `pd_score >= threshold`.
    pub fn from_scores(pd_scores: &[f64], hc_scores: &[f64], truths: &[Label], threshold: f64) -> Result<Self> {
        let preds: Vec<Label> = pd_scores
            .iter()
            .map(|&s| if s >= threshold { Label::Pd } else { Label::Hc })
            .collect();
        let matrix = confusion(&preds, truths)?;
        let mut auc_map = BTreeMap::new();
        auc_map.insert("PD".into(), auc(&roc_curve(pd_scores, truths, Label::Pd)?)?);
        auc_map.insert("HC".into(), auc(&roc_curve(hc_scores, truths, Label::Hc)?)?);
        Ok(StageSummary {
            matrix,
            metrics: scalar_metrics(&matrix)?,
            auc: auc_map,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: String,
    #[serde(flatten)]
    pub summary: StageSummary,
    pub decision_threshold: f64,
    pub n_samples: usize,
    /// The CNN's own softmax decision, before boosting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cnn: Option<StageSummary>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub reported_by_source: ReferenceFigures,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    /// ROC curve per positive class; stored in `roc.csv`.
    #[serde(skip)]
    pub roc: BTreeMap<String, RocCurve>,
    /// PD-positive sweep; stored in `threshold_sweep.csv`.
    #[serde(skip)]
    pub sweep: Vec<SweepRow>,
    /// Training curves; stored in `history.csv` when present.
    #[serde(skip)]
    pub history: Option<History>,
}

impl EvalReport {
    pub fn from_scores(pd_scores: &[f64], hc_scores: &[f64], truths: &[Label], threshold: f64) -> Result<Self> {
        let summary = StageSummary::from_scores(pd_scores, hc_scores, truths, threshold)?;
        let mut roc = BTreeMap::new();
        roc.insert("PD".to_string(), roc_curve(pd_scores, truths, Label::Pd)?);
        roc.insert("HC".to_string(), roc_curve(hc_scores, truths, Label::Hc)?);
        Ok(EvalReport {
            schema: METRICS_SCHEMA.into(),
            summary,
            decision_threshold: threshold,
            n_samples: truths.len(),
            cnn: None,
            reported_by_source: BTreeMap::new(),
            config_hash: None,
            roc,
            sweep: threshold_sweep(pd_scores, truths)?,
            history: None,
        })
    }

    /// Report built from counts alone (no scores, so no curves or AUC).
    pub fn from_matrix(matrix: ConfusionMatrix) -> Result<Self> {
        Ok(EvalReport {
            schema: METRICS_SCHEMA.into(),
            summary: StageSummary {
                matrix,
                metrics: scalar_metrics(&matrix)?,
                auc: BTreeMap::new(),
            },
            decision_threshold: 0.5,
            n_samples: matrix.total() as usize,
            cnn: None,
            reported_by_source: BTreeMap::new(),
            config_hash: None,
            roc: BTreeMap::new(),
            sweep: Vec::new(),
            history: None,
        })
    }

    pub fn metrics_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn roc_csv(&self) -> String {
        let mut s = String::from("class,threshold,fpr,tpr\n");
        for (class, curve) in &self.roc {
            for (t, (x, y)) in curve.thresholds.iter().zip(&curve.points) {
                let _ = writeln!(s, "{class},{t},{x},{y}");
            }
        }
        s
    }

    pub fn sweep_csv(&self) -> String {
        let mut s = String::from("threshold,precision,recall,f1\n");
        for r in &self.sweep {
            let _ = writeln!(s, "{},{},{},{}", r.threshold, r.precision, r.recall, r.f1);
        }
        s
    }

    /// Human-readable summary, including any published figures set beside
    /// the values recomputed from the confusion counts.
    pub fn text(&self) -> String {
        let mut s = String::new();
        let m = &self.summary.matrix;
        let _ = writeln!(s, "Evaluation report");
        let _ = writeln!(
            s,
            "samples: {}   decision: PD when score >= {}",
            self.n_samples, self.decision_threshold
        );
        if let Some(h) = &self.config_hash {
            let _ = writeln!(s, "config hash: {h}");
        }
        let _ = writeln!(s);
        write_stage(&mut s, "final prediction", &self.summary);
        if let Some(cnn) = &self.cnn {
            write_stage(&mut s, "CNN softmax before boosting", cnn);
        }
        if !self.reported_by_source.is_empty() {
            let _ = writeln!(s, "figures reported by source:");
            for (name, &v) in &self.reported_by_source {
                let computed = metric_by_name(&self.summary.metrics, name);
                let verdict = match computed {
                    Some(c) if (c - v).abs() <= 5e-5 => format!("reported by source, consistent with its matrix (computed {c:.4})"),
                    Some(c) => format!("reported by source, inconsistent with its matrix (computed {c:.4})"),
                    None => "reported by source".to_string(),
                };
                let _ = writeln!(s, "  {name:<12} {v:.4}   {verdict}");
            }
            let _ = writeln!(s);
        }
        let _ = writeln!(s, "notes:");
        let _ = writeln!(
            s,
            "  accuracy = (TP + TN) / total; a variant printing TP + FN as the numerator is treated as a typo."
        );
        let _ = writeln!(s, "  fpr = 1 - specificity.");
        if !self.summary.metrics.zero_denominator.is_empty() {
            let _ = writeln!(
                s,
                "  zero denominator, reported as 0: {}",
                self.summary.metrics.zero_denominator.join(", ")
            );
        }
        let _ = writeln!(s, "  counts: tp={} tn={} fp={} fn={}", m.tp, m.tn, m.fp, m.fn_);
        s
    }

    /// Parses the files written by [`emit_report`].
    pub fn load(dir: &Path) -> Result<Self> {
        let read = |name: &str| {
            let p = dir.join(name);
            std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))
        };
        let mut report: EvalReport = serde_json::from_str(&read("metrics.json")?)?;
        let mut roc: BTreeMap<String, RocCurve> = BTreeMap::new();
        for (class, t, x, y) in parse_csv::<(String, f64, f64, f64)>(&read("roc.csv")?, "roc.csv")? {
            let c = roc.entry(class).or_insert(RocCurve {
                points: Vec::new(),
                thresholds: Vec::new(),
            });
            c.thresholds.push(t);
            c.points.push((x, y));
        }
        report.roc = roc;
        report.sweep = parse_csv::<(f64, f64, f64, f64)>(&read("threshold_sweep.csv")?, "threshold_sweep.csv")?
            .into_iter()
            .map(|(threshold, precision, recall, f1)| SweepRow {
                threshold,
                precision,
                recall,
                f1,
            })
            .collect();
        let hist = dir.join("history.csv");
        if hist.exists() {
            report.history = Some(History {
                epochs: parse_csv::<EpochRecord>(&read("history.csv")?, "history.csv")?,
            });
        }
        Ok(report)
    }
}

fn parse_csv<T: serde::de::DeserializeOwned>(text: &str, name: &str) -> Result<Vec<T>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| Error::Format(format!("{name}: {e}")))
}

fn metric_by_name(m: &ScalarMetrics, name: &str) -> Option<f64> {
    Some(match name {
        "accuracy" => m.accuracy,
        "precision" => m.precision,
        "recall" => m.recall,
        "specificity" => m.specificity,
        "f1" => m.f1,
        "fpr" => m.fpr,
        _ => return None,
    })
}

fn write_stage(s: &mut String, title: &str, st: &StageSummary) {
    let m = &st.matrix;
    let _ = writeln!(s, "{title}");
    let _ = writeln!(s, "               pred PD   pred HC");
    let _ = writeln!(s, "  true PD   {:>9} {:>9}", m.tp, m.fn_);
    let _ = writeln!(s, "  true HC   {:>9} {:>9}", m.fp, m.tn);
    let x = &st.metrics;
    for (name, v) in [
        ("accuracy", x.accuracy),
        ("precision", x.precision),
        ("recall", x.recall),
        ("specificity", x.specificity),
        ("f1", x.f1),
        ("fpr", x.fpr),
    ] {
        let _ = writeln!(s, "  {name:<12} {v:.4}");
    }
    for (class, v) in &st.auc {
        let _ = writeln!(s, "  AUC {class:<8} {v:.4}");
    }
    let _ = writeln!(s);
}

fn write(dir: &Path, name: &str, content: &str) -> Result<()> {
    let p = dir.join(name);
    std::fs::write(&p, content).map_err(|e| Error::io(&p, e))
}

/// Writes `metrics.json`, `roc.csv`, `threshold_sweep.csv`, `report.txt`
/// and SVG charts (plus `history.csv` and training curves when the report
/// carries a history). Output is byte-identical for equal reports.
pub fn emit_report(report: &EvalReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(dir, "metrics.json", &report.metrics_json()?)?;
    write(dir, "roc.csv", &report.roc_csv())?;
    write(dir, "threshold_sweep.csv", &report.sweep_csv())?;
    write(dir, "report.txt", &report.text())?;

    let roc_series: Vec<Series> = report
        .roc
        .iter()
        .enumerate()
        .map(|(i, (class, c))| Series {
            name: class,
            points: c.points.clone(),
            color: COLORS[i % COLORS.len()],
        })
        .collect();
    write(
        dir,
        "roc.svg",
        &line_chart("ROC", "false positive rate", "true positive rate", (0.0, 1.0), (0.0, 1.0), &roc_series, true),
    )?;
    let pick = |f: fn(&SweepRow) -> f64| -> Vec<(f64, f64)> { report.sweep.iter().map(|r| (r.threshold, f(r))).collect() };
    let finite: Vec<f64> = report.sweep.iter().map(|r| r.threshold).filter(|t| t.is_finite()).collect();
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let x_range = if lo.is_finite() { (lo.min(0.0), hi.max(1.0)) } else { (0.0, 1.0) };
    write(
        dir,
        "precision_threshold.svg",
        &line_chart(
            "Precision and recall vs threshold",
            "threshold (PD score)",
            "value",
            x_range,
            (0.0, 1.0),
            &[
                Series {
                    name: "precision",
                    points: pick(|r| r.precision),
                    color: COLORS[0],
                },
                Series {
                    name: "recall",
                    points: pick(|r| r.recall),
                    color: COLORS[1],
                },
                Series {
                    name: "f1",
                    points: pick(|r| r.f1),
                    color: COLORS[2],
                },
            ],
            false,
        ),
    )?;

    if let Some(h) = &report.history {
        write(dir, "history.csv", &h.to_csv())?;
        let n = h.epochs.len().max(1) as f64;
        let series = |f: fn(&EpochRecord) -> f64| -> Vec<(f64, f64)> { h.epochs.iter().map(|e| (e.epoch as f64, f(e))).collect() };
        let max_loss = h
            .epochs
            .iter()
            .flat_map(|e| [e.train_loss, e.val_loss])
            .filter(|v| v.is_finite())
            .fold(0.0, f64::max);
        write(
            dir,
            "loss.svg",
            &line_chart(
                "Loss",
                "epoch",
                "cross-entropy",
                (1.0, n),
                (0.0, if max_loss > 0.0 { max_loss } else { 1.0 }),
                &[
                    Series {
                        name: "train",
                        points: series(|e| e.train_loss),
                        color: COLORS[0],
                    },
                    Series {
                        name: "validation",
                        points: series(|e| e.val_loss),
                        color: COLORS[1],
                    },
                ],
                false,
            ),
        )?;
        write(
            dir,
            "accuracy.svg",
            &line_chart(
                "Accuracy",
                "epoch",
                "accuracy",
                (1.0, n),
                (0.0, 1.0),
                &[
                    Series {
                        name: "train",
                        points: series(|e| e.train_accuracy),
                        color: COLORS[0],
                    },
                    Series {
                        name: "validation",
                        points: series(|e| e.val_accuracy),
                        color: COLORS[1],
                    },
                ],
                false,
            ),
        )?;
    }
    Ok(())
}
