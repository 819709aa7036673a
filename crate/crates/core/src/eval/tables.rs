use std::fmt::Write;

use super::scenarios::{Evaluation, Scenario, BOTH_COLUMN, MEAN_COLUMN, STABLE_COLUMN, UNSTABLE_COLUMN};
use super::timing::TimingReport;
use super::RocPoint;
use crate::attacks::AttackKind;

const ATTACK_SCENARIOS: [Scenario; 3] = [Scenario::WhiteBox, Scenario::GreyBox1, Scenario::GreyBox2];

fn cell_text(v: Option<f64>, precise: bool) -> String {
    match (v, precise) {
        (Some(v), true) => v.to_string(),
        (Some(v), false) => format!("{v:.3}"),
        (None, _) => "N/A".into(),
    }
}

fn table2_rows(eval: &Evaluation, model: &str, precise: bool) -> Vec<Vec<String>> {
    ATTACK_SCENARIOS
        .iter()
        .filter_map(|&s| eval.report(s, model))
        .map(|r| {
            let mut row = vec![r.scenario.title().to_string()];
            row.extend(AttackKind::ALL.iter().map(|k| cell_text(r.value(k.title()), precise)));
            row.push(cell_text(r.mean(), precise));
            row
        })
        .collect()
}

fn table2_header() -> Vec<String> {
    let mut h = vec!["scenario".to_string()];
    h.extend(AttackKind::ALL.iter().map(|k| k.title().to_string()));
    h.push("mean".into());
    h
}

/// Attack-detection table for `model`, one row per attack scenario.
pub fn table2_csv(eval: &Evaluation, model: &str) -> String {
    let mut out = table2_header().join(",") + "\n";
    for row in table2_rows(eval, model, true) {
        out += &(row.join(",") + "\n");
    }
    out
}

fn table3_rows(eval: &Evaluation, precise: bool) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for r in eval.reports.iter().filter(|r| r.scenario == Scenario::Baseline) {
        let both = r.cell(BOTH_COLUMN);
        for (class, col) in [("Stable class", STABLE_COLUMN), ("Unstable class", UNSTABLE_COLUMN)] {
            rows.push(vec![
                r.model.clone(),
                class.to_string(),
                cell_text(r.value(col), precise),
                "-".into(),
                "-".into(),
            ]);
        }
        rows.push(vec![
            r.model.clone(),
            BOTH_COLUMN.to_string(),
            cell_text(both.and_then(|c| c.value), precise),
            cell_text(both.and_then(|c| c.metrics).map(|m| m.f1), precise),
            cell_text(r.value(MEAN_COLUMN), precise),
        ]);
    }
    rows
}

const TABLE3_HEADER: [&str; 5] = ["model", "class", "accuracy", "f1", "mean_per_class"];

/// Clean classification table: per-class accuracy, both-class accuracy and
/// F1, and the unweighted mean of the class accuracies.
pub fn table3_csv(eval: &Evaluation) -> String {
    let mut out = TABLE3_HEADER.join(",") + "\n";
    for row in table3_rows(eval, true) {
        out += &(row.join(",") + "\n");
    }
    out
}

pub fn roc_csv(points: &[RocPoint]) -> String {
    let mut out = String::from("threshold,tpr,fpr\n");
    for p in points {
        let _ = writeln!(out, "{},{},{}", p.threshold, p.tpr, p.fpr);
    }
    out
}

fn align(header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: &[String]| {
        cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = line(header) + "\n";
    out += &(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  ") + "\n");
    for r in rows {
        out += &(line(r) + "\n");
    }
    out
}

pub fn render_table2(eval: &Evaluation, model: &str) -> String {
    format!(
        "Attack detection accuracy ({model})\n{}",
        align(&table2_header(), &table2_rows(eval, model, false))
    )
}

pub fn render_table3(eval: &Evaluation) -> String {
    let header: Vec<String> = TABLE3_HEADER.iter().map(|s| s.to_string()).collect();
    format!(
        "Classification on clean test data\n{}",
        align(&header, &table3_rows(eval, false))
    )
}

const TIMING_HEADER: [&str; 4] = ["measurement", "mean", "std", "repetitions"];

fn timing_rows(t: &TimingReport, precise: bool) -> Vec<Vec<String>> {
    let f = |v: f64| if precise { v.to_string() } else { format!("{v:.5}") };
    [
        ("epoch_with_adversarial_layer_s", &t.epoch_with_adversarial_layer),
        ("epoch_without_adversarial_layer_s", &t.epoch_without_adversarial_layer),
        ("inference_batch_ms", &t.inference_batch_ms),
    ]
    .into_iter()
    .map(|(name, s)| vec![name.to_string(), f(s.mean), f(s.std), s.n.to_string()])
    .collect()
}

/// Timing report as CSV. Wall-clock values differ between runs.
pub fn timing_csv(t: &TimingReport) -> String {
    let mut out = TIMING_HEADER.join(",") + "\n";
    for row in timing_rows(t, true) {
        out += &(row.join(",") + "\n");
    }
    out
}

pub fn render_timing(t: &TimingReport) -> String {
    let header: Vec<String> = TIMING_HEADER.iter().map(|s| s.to_string()).collect();
    format!(
        "Timing ({} training rows, batch {})\n{}",
        t.rows,
        t.batch_size,
        align(&header, &timing_rows(t, false))
    )
}
