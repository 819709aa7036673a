use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::nn::Matrix;
use crate::{Error, Result};

/// Per-feature z-score statistics (population standard deviation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub feature_names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Features whose variance was zero; their `std` was replaced by 1.
    #[serde(default)]
    pub degenerate: Vec<String>,
}

/// Fits statistics on `train`. Zero-variance features fall back to `std = 1`
/// and are listed in [`NormStats::degenerate`].
pub fn zscore_fit(train: &Dataset) -> Result<NormStats> {
    let n = train.len();
    if n == 0 {
        return Err(Error::Argument("cannot fit normalization on zero rows".into()));
    }
    let d = train.n_features();
    let mut mean = vec![0.0; d];
    for row in train.features.iter_rows() {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut var = vec![0.0; d];
    for row in train.features.iter_rows() {
        for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let mut degenerate = Vec::new();
    let std = var
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let sd = (s / n as f64).sqrt();
            if sd > 0.0 && sd.is_finite() {
                sd
            } else {
                let name = train.feature_names[i].clone();
                log::warn!("feature '{name}' has zero variance; using std = 1");
                degenerate.push(name);
                1.0
            }
        })
        .collect();
    Ok(NormStats {
        feature_names: train.feature_names.clone(),
        mean,
        std,
        seed: None,
        degenerate,
    })
}

impl NormStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Identity statistics (mean 0, std 1).
    pub fn identity(dim: usize) -> Self {
        Self {
            feature_names: (0..dim).map(|i| format!("x{i}")).collect(),
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
            seed: None,
            degenerate: Vec::new(),
        }
    }

    fn check(&self, m: &Matrix) -> Result<()> {
        if m.cols() != self.dim() {
            return Err(Error::shape("NormStats", self.dim(), m.cols()));
        }
        Ok(())
    }

    pub fn apply_matrix(&self, m: &Matrix) -> Result<Matrix> {
        self.check(m)?;
        let mut out = m.clone();
        for r in 0..out.rows() {
            for ((v, &mu), &sd) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - mu) / sd;
            }
        }
        Ok(out)
    }

    pub fn inverse_matrix(&self, m: &Matrix) -> Result<Matrix> {
        self.check(m)?;
        let mut out = m.clone();
        for r in 0..out.rows() {
            for ((v, &mu), &sd) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = *v * sd + mu;
            }
        }
        Ok(out)
    }

    pub fn apply(&self, d: &Dataset) -> Result<Dataset> {
        Ok(Dataset {
            features: self.apply_matrix(&d.features)?,
            ..d.clone()
        })
    }

    pub fn inverse(&self, d: &Dataset) -> Result<Dataset> {
        Ok(Dataset {
            features: self.inverse_matrix(&d.features)?,
            ..d.clone()
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
