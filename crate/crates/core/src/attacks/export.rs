use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{AdversarialBatch, AttackConfig, AttackKind};
use crate::checkpoint::write_atomic;
use crate::data::{Label, NormStats, FEATURE_NAMES};
use crate::nn::Matrix;
use crate::{Error, Result};

/// Metadata written next to an exported batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSidecar {
    pub attack: AttackKind,
    pub config: AttackConfig,
    pub seed: u64,
    pub rows: usize,
    /// Always "raw": exported features are de-normalized when statistics are
    /// attached to the batch.
    pub units: String,
    pub norm_stats: Option<NormStats>,
    #[serde(default)]
    pub provenance: BTreeMap<String, String>,
}

impl BatchSidecar {
    pub fn path_for(csv_path: &Path) -> PathBuf {
        csv_path.with_extension("meta.json")
    }
}

/// Writes `row_id, attack, clean_*, adv_*, true_label` rows plus a
/// `<name>.meta.json` sidecar. Clean columns are empty for generative
/// attacks. Returns the sidecar path.
pub fn write_batch_csv(
    batch: &AdversarialBatch,
    path: impl AsRef<Path>,
    provenance: &BTreeMap<String, String>,
) -> Result<PathBuf> {
    let path = path.as_ref();
    let dim = batch.x_adv.cols();
    if dim != FEATURE_NAMES.len() {
        return Err(Error::shape("write_batch_csv", FEATURE_NAMES.len(), dim));
    }
    if batch.true_labels.len() != batch.len() {
        return Err(Error::shape(
            "write_batch_csv labels",
            batch.len(),
            batch.true_labels.len(),
        ));
    }
    let to_raw = |m| match &batch.norm_stats {
        Some(s) => s.inverse_matrix(m),
        None => Ok(m.clone()),
    };
    let adv = to_raw(&batch.x_adv)?;
    let clean = batch.x_clean.as_ref().map(to_raw).transpose()?;

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["row_id".to_string(), "attack".to_string()];
    header.extend(FEATURE_NAMES.iter().map(|n| format!("clean_{n}")));
    header.extend(FEATURE_NAMES.iter().map(|n| format!("adv_{n}")));
    header.push("true_label".into());
    w.write_record(&header)?;
    for r in 0..batch.len() {
        let mut rec = vec![r.to_string(), batch.attack.name().to_string()];
        match &clean {
            Some(c) => rec.extend(c.row(r).iter().map(|v| v.to_string())),
            None => rec.extend(std::iter::repeat_n(String::new(), dim)),
        }
        rec.extend(adv.row(r).iter().map(|v| v.to_string()));
        rec.push(batch.true_labels[r].as_str().to_string());
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    write_atomic(path, &bytes)?;

    let sidecar = BatchSidecar {
        attack: batch.attack,
        config: batch.config,
        seed: batch.seed,
        rows: batch.len(),
        units: "raw".into(),
        norm_stats: batch.norm_stats.clone(),
        provenance: provenance.clone(),
    };
    let side_path = BatchSidecar::path_for(path);
    write_atomic(&side_path, (serde_json::to_string_pretty(&sidecar)? + "\n").as_bytes())?;
    Ok(side_path)
}

/// Rows of an exported batch, in raw units.
#[derive(Debug, Clone, PartialEq)]
pub struct ExportedBatch {
    pub sidecar: BatchSidecar,
    pub clean: Option<Matrix>,
    pub adv: Matrix,
    pub true_labels: Vec<Label>,
}

/// Reads a batch written by [`write_batch_csv`] together with its sidecar.
pub fn read_batch_csv(path: impl AsRef<Path>) -> Result<ExportedBatch> {
    let path = path.as_ref();
    let side_path = BatchSidecar::path_for(path);
    let side_text = std::fs::read_to_string(&side_path).map_err(|e| Error::io(&side_path, e))?;
    let sidecar: BatchSidecar = serde_json::from_str(&side_text)?;
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let dim = FEATURE_NAMES.len();
    let expected = 2 + 2 * dim + 1;
    let (mut clean, mut adv, mut labels) = (Vec::new(), Vec::new(), Vec::new());
    let mut has_clean = true;
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        if rec.len() != expected {
            return Err(Error::Schema(format!(
                "{}: expected {expected} columns, found {}",
                path.display(),
                rec.len()
            )));
        }
        let num = |c: usize| -> Result<f64> {
            rec[c].parse().map_err(|_| Error::Parse {
                row,
                column: c.to_string(),
                message: format!("not a number: '{}'", &rec[c]),
            })
        };
        if rec[2].is_empty() {
            has_clean = false;
        } else {
            for c in 2..2 + dim {
                clean.push(num(c)?);
            }
        }
        for c in 2 + dim..2 + 2 * dim {
            adv.push(num(c)?);
        }
        labels.push(Label::parse(&rec[expected - 1]).ok_or_else(|| Error::Parse {
            row,
            column: "true_label".into(),
            message: format!("unknown label '{}'", &rec[expected - 1]),
        })?);
    }
    let n = labels.len();
    if n != sidecar.rows {
        return Err(Error::Schema(format!(
            "{}: {} rows but the sidecar lists {}",
            path.display(),
            n,
            sidecar.rows
        )));
    }
    Ok(ExportedBatch {
        sidecar,
        clean: if has_clean && n > 0 {
            Some(Matrix::from_vec(n, dim, clean)?)
        } else {
            None
        },
        adv: Matrix::from_vec(n, dim, adv)?,
        true_labels: labels,
    })
}
