use std::io::{Read, Write};
use std::path::Path;

use super::{Dataset, Label, FEATURE_COUNT, FEATURE_NAMES};
use crate::nn::Matrix;
use crate::{Error, Result};

/// Relative tolerance for the producer-balance check `p1 = -(p2 + p3 + p4)`.
/// The published file derives `p1` from the consumers, so only rounding noise
/// is expected.
pub const PRODUCER_BALANCE_TOL: f64 = 1e-6;

/// Non-fatal findings from loading a file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadReport {
    pub rows: usize,
    /// Rows whose producer power deviates from the consumer sum.
    pub unbalanced_rows: usize,
    pub max_balance_residual: f64,
    pub warnings: Vec<String>,
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<(Dataset, LoadReport)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file)
}

/// Parses a header-named CSV with the 12 features plus `stab` and `stabf`.
/// Columns are matched by name, so their order does not matter; extra
/// columns are ignored.
pub fn read_csv<R: Read>(reader: R) -> Result<(Dataset, LoadReport)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column '{name}'")))
    };
    let feature_cols = FEATURE_NAMES.iter().map(|n| find(n)).collect::<Result<Vec<_>>>()?;
    let stab_col = find("stab")?;
    let stabf_col = find("stabf")?;

    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut stab = Vec::new();
    let mut report = LoadReport::default();
    for (idx, record) in rdr.records().enumerate() {
        let row = idx + 1;
        let record = record?;
        let cell = |col: usize, name: &str| -> Result<f64> {
            let raw = record.get(col).unwrap_or("");
            let v: f64 = raw.parse().map_err(|_| Error::Parse {
                row,
                column: name.to_string(),
                message: format!("'{raw}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: name.to_string(),
                    message: format!("'{raw}' is not finite"),
                });
            }
            Ok(v)
        };
        let mut feats = [0.0; FEATURE_COUNT];
        for (k, &col) in feature_cols.iter().enumerate() {
            feats[k] = cell(col, FEATURE_NAMES[k])?;
        }
        let s = cell(stab_col, "stab")?;
        let raw_label = record.get(stabf_col).unwrap_or("");
        let label = Label::parse(raw_label).ok_or_else(|| Error::Parse {
            row,
            column: "stabf".into(),
            message: format!("'{raw_label}' is neither 'stable' nor 'unstable'"),
        })?;
        if (s < 0.0) != (label == Label::Stable) {
            return Err(Error::Parse {
                row,
                column: "stabf".into(),
                message: format!("label '{label}' contradicts stab = {s}"),
            });
        }
        let residual = feats[4] + feats[5] + feats[6] + feats[7];
        let scale = feats[4].abs().max(1.0);
        let rel = residual.abs() / scale;
        report.max_balance_residual = report.max_balance_residual.max(rel);
        if rel > PRODUCER_BALANCE_TOL {
            report.unbalanced_rows += 1;
        }
        data.extend_from_slice(&feats);
        labels.push(label);
        stab.push(s);
    }
    let n = labels.len();
    report.rows = n;
    if report.unbalanced_rows > 0 {
        let msg = format!(
            "{} of {n} rows violate p1 = -(p2+p3+p4) (max relative residual {:.3e})",
            report.unbalanced_rows, report.max_balance_residual
        );
        log::warn!("{msg}");
        report.warnings.push(msg);
    }
    let ds = Dataset::new(Matrix::from_vec(n, FEATURE_COUNT, data)?, labels, stab)?;
    Ok((ds, report))
}

/// Writes the dataset with the same schema it is read with.
pub fn write_csv<W: Write>(d: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = d.feature_names.iter().map(String::as_str).collect();
    header.extend(["stab", "stabf"]);
    w.write_record(&header)?;
    let mut fields = Vec::with_capacity(header.len());
    for r in 0..d.len() {
        fields.clear();
        fields.extend(d.features.row(r).iter().map(|v| v.to_string()));
        fields.push(d.stab[r].to_string());
        fields.push(d.labels[r].to_string());
        w.write_record(&fields)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
