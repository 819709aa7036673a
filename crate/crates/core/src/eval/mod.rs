//! Detection metrics with "unstable" as the positive class, ROC/AUC, the
//! scenario runner behind the report tables, and timing benchmarks.

mod scenarios;
mod tables;
mod timing;

use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::{Error, Result};

pub use scenarios::{
    clean_cells, detection_from_raw, not_performed, run_scenarios, CleanEvaluation, Evaluation, ReportCell, Scenario,
    ScenarioInputs, ScenarioReport, ScenarioSettings, AUC_COLUMN, BASELINE_MODEL, BOTH_COLUMN, MEAN_COLUMN,
    PRIMARY_MODEL, STABLE_COLUMN, UNSTABLE_COLUMN,
};
pub use tables::{render_table2, render_table3, render_timing, roc_csv, table2_csv, table3_csv, timing_csv};
pub use timing::{bench_timing, Stat, TimingConfig, TimingReport};

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

/// Tallies predictions against truth, positive = unstable.
pub fn confusion(truth: &[Label], pred: &[Label]) -> Result<ConfusionMatrix> {
    if truth.len() != pred.len() {
        return Err(Error::Argument(format!(
            "label lengths differ: {} true vs {} predicted",
            truth.len(),
            pred.len()
        )));
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in truth.iter().zip(pred) {
        match (t, p) {
            (Label::Unstable, Label::Unstable) => cm.tp += 1,
            (Label::Stable, Label::Stable) => cm.tn += 1,
            (Label::Stable, Label::Unstable) => cm.fp += 1,
            (Label::Unstable, Label::Stable) => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub f1: f64,
}

/// Accuracy `(TP + TN) / total` and F1 `2TP / (2TP + FP + FN)`, the latter
/// 0 when its denominator is.
pub fn metrics(cm: &ConfusionMatrix) -> Result<Metrics> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Argument("metrics of an empty confusion matrix".into()));
    }
    let denom = 2 * cm.tp + cm.fp + cm.fn_;
    Ok(Metrics {
        accuracy: (cm.tp + cm.tn) as f64 / total as f64,
        f1: if denom == 0 {
            0.0
        } else {
            (2 * cm.tp) as f64 / denom as f64
        },
    })
}

/// Fraction of `pred` equal to `label`; 0 for an empty slice.
pub fn fraction_labelled(pred: &[Label], label: Label) -> f64 {
    if pred.is_empty() {
        return 0.0;
    }
    pred.iter().filter(|&&p| p == label).count() as f64 / pred.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
}

/// ROC of `scores` (higher = more likely unstable; a row is flagged when
/// `score >= threshold`). Thresholds are `n_thresholds` evenly spaced
/// values over `[0, 1]` plus every distinct score, returned ascending. The
/// AUC is the trapezoid area over the distinct-score curve.
pub fn roc(scores: &[f64], truth: &[Label], n_thresholds: usize) -> Result<(Vec<RocPoint>, f64)> {
    if scores.len() != truth.len() {
        return Err(Error::Argument(format!(
            "{} scores for {} labels",
            scores.len(),
            truth.len()
        )));
    }
    if let Some(s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::Argument(format!("score {s} outside [0, 1]")));
    }
    let mut pos: Vec<f64> = Vec::new();
    let mut neg: Vec<f64> = Vec::new();
    for (&s, &l) in scores.iter().zip(truth) {
        match l {
            Label::Unstable => pos.push(s),
            Label::Stable => neg.push(s),
        }
    }
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Argument("AUC is undefined for single-class labels".into()));
    }
    pos.sort_by(f64::total_cmp);
    neg.sort_by(f64::total_cmp);
    let (np, nn) = (pos.len() as f64, neg.len() as f64);
    let at_or_above = |sorted: &[f64], t: f64| sorted.len() - sorted.partition_point(|&v| v < t);
    let point = |t: f64| RocPoint {
        threshold: t,
        tpr: at_or_above(&pos, t) as f64 / np,
        fpr: at_or_above(&neg, t) as f64 / nn,
    };

    let mut distinct: Vec<f64> = scores.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();

    // descending thresholds walk the curve from (0,0) to (1,1)
    let mut auc = 0.0;
    let (mut prev_fpr, mut prev_tpr) = (0.0, 0.0);
    for &t in distinct.iter().rev() {
        let p = point(t);
        auc += (p.fpr - prev_fpr) * (p.tpr + prev_tpr) / 2.0;
        prev_fpr = p.fpr;
        prev_tpr = p.tpr;
    }

    let mut thresholds = distinct;
    if n_thresholds >= 2 {
        thresholds.extend((0..n_thresholds).map(|i| i as f64 / (n_thresholds - 1) as f64));
    } else if n_thresholds == 1 {
        thresholds.push(0.5);
    }
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    Ok((thresholds.into_iter().map(point).collect(), auc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Stable as S, Unstable as U};

    #[test]
    fn all_correct() {
        let y = [U, U, U, U, U, S, S, S, S, S];
        let cm = confusion(&y, &y).unwrap();
        assert_eq!((cm.tp, cm.tn, cm.fp, cm.fn_), (5, 5, 0, 0));
        let m = metrics(&cm).unwrap();
        assert_eq!((m.accuracy, m.f1), (1.0, 1.0));
    }

    #[test]
    fn inverted_predictions() {
        let y = [U, S, U];
        let p = [S, U, S];
        let cm = confusion(&y, &p).unwrap();
        assert_eq!((cm.tp, cm.tn), (0, 0));
        assert_eq!(metrics(&cm).unwrap().f1, 0.0);
    }

    #[test]
    fn single_true_positive() {
        let cm = ConfusionMatrix {
            tp: 1,
            ..Default::default()
        };
        let m = metrics(&cm).unwrap();
        assert_eq!((m.accuracy, m.f1), (1.0, 1.0));
    }

    #[test]
    fn f1_zero_without_positives() {
        let cm = ConfusionMatrix {
            tn: 4,
            ..Default::default()
        };
        assert_eq!(metrics(&cm).unwrap().f1, 0.0);
        assert!(metrics(&ConfusionMatrix::default()).is_err());
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(matches!(confusion(&[U], &[U, S]).unwrap_err(), Error::Argument(_)));
    }

    #[test]
    fn separated_and_tied_auc() {
        let y = [U, U, S, S];
        assert_eq!(roc(&[0.9, 0.8, 0.2, 0.1], &y, 11).unwrap().1, 1.0);
        assert_eq!(roc(&[0.5; 4], &y, 11).unwrap().1, 0.5);
        assert!(roc(&[0.5, 0.6], &[U, U], 11).is_err());
    }

    #[test]
    fn roc_points_sorted_and_monotone() {
        let (pts, _) = roc(&[0.3, 0.7, 0.7, 0.1], &[U, S, U, S], 5).unwrap();
        for w in pts.windows(2) {
            assert!(w[0].threshold < w[1].threshold);
            assert!(w[0].tpr >= w[1].tpr && w[0].fpr >= w[1].fpr);
        }
    }
}
