//! Electrical-grid stability data: ingestion, consumer-permutation
//! augmentation, z-score normalization, stable-only splitting and windowing.

mod io;
mod norm;
pub mod synthetic;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::nn::Matrix;
use crate::{seeded_rng, Error, Result};

pub use io::{load_csv, read_csv, write_csv, LoadReport};
pub use norm::{zscore_fit, NormStats};

/// Column names of the 12 predictive features, in canonical order.
pub const FEATURE_NAMES: [&str; 12] = [
    "tau1", "tau2", "tau3", "tau4", "p1", "p2", "p3", "p4", "g1", "g2", "g3", "g4",
];
pub const FEATURE_COUNT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Stable,
    Unstable,
}

impl Label {
    /// Discriminator target: stable (real) is 1, unstable (fake) is 0.
    pub fn target(self) -> f64 {
        match self {
            Label::Stable => 1.0,
            Label::Unstable => 0.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Stable => "stable",
            Label::Unstable => "unstable",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "stable" => Some(Label::Stable),
            "unstable" => Some(Label::Unstable),
            _ => None,
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One row of the source data in physical units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSample {
    /// Reaction times of nodes 1..4 (s).
    pub tau: [f64; 4],
    /// Nominal power; node 1 produces, nodes 2..4 consume.
    pub p: [f64; 4],
    /// Price-elasticity coefficients.
    pub g: [f64; 4],
    pub stab: f64,
    pub stabf: Label,
}

impl GridSample {
    pub fn features(&self) -> [f64; FEATURE_COUNT] {
        let mut out = [0.0; FEATURE_COUNT];
        out[..4].copy_from_slice(&self.tau);
        out[4..8].copy_from_slice(&self.p);
        out[8..].copy_from_slice(&self.g);
        out
    }
}

/// Feature matrix with per-row labels. `row_ids` track where each row came
/// from so splits can be checked for disjointness.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<Label>,
    pub stab: Vec<f64>,
    pub feature_names: Vec<String>,
    pub row_ids: Vec<usize>,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<Label>, stab: Vec<f64>) -> Result<Self> {
        if features.rows() != labels.len() || labels.len() != stab.len() {
            return Err(Error::shape(
                "Dataset::new",
                format!("{} labels and stab values", features.rows()),
                format!("{} labels, {} stab", labels.len(), stab.len()),
            ));
        }
        let n = labels.len();
        let names = if features.cols() == FEATURE_COUNT {
            FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
        } else {
            (0..features.cols()).map(|i| format!("x{i}")).collect()
        };
        Ok(Self {
            features,
            labels,
            stab,
            feature_names: names,
            row_ids: (0..n).collect(),
        })
    }

    pub fn from_samples(samples: &[GridSample]) -> Self {
        let rows: Vec<[f64; FEATURE_COUNT]> = samples.iter().map(GridSample::features).collect();
        let features = Matrix::from_rows(&rows).expect("fixed width");
        let features = if samples.is_empty() {
            Matrix::zeros(0, FEATURE_COUNT)
        } else {
            features
        };
        Self::new(
            features,
            samples.iter().map(|s| s.stabf).collect(),
            samples.iter().map(|s| s.stab).collect(),
        )
        .expect("consistent lengths")
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.labels.iter().map(|l| l.target()).collect()
    }

    /// Rows at `indices`, in that order, keeping their row ids.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            stab: indices.iter().map(|&i| self.stab[i]).collect(),
            feature_names: self.feature_names.clone(),
            row_ids: indices.iter().map(|&i| self.row_ids[i]).collect(),
        }
    }

    pub fn filter(&self, label: Label) -> Dataset {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| self.labels[i] == label).collect();
        self.subset(&idx)
    }

    /// Appends `other` below `self`.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        Ok(Dataset {
            features: self.features.vstack(&other.features)?,
            labels: self.labels.iter().chain(&other.labels).copied().collect(),
            stab: self.stab.iter().chain(&other.stab).copied().collect(),
            feature_names: self.feature_names.clone(),
            row_ids: self.row_ids.iter().chain(&other.row_ids).copied().collect(),
        })
    }

    /// Seeded random subsample of `n` rows (all rows when `n >= len`), kept
    /// in original order.
    pub fn subsample(&self, n: usize, seed: u64) -> Dataset {
        if n >= self.len() {
            return self.clone();
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut seeded_rng(seed));
        idx.truncate(n);
        idx.sort_unstable();
        self.subset(&idx)
    }
}

/// The six orderings of consumer nodes 2..4, identity first.
pub const CONSUMER_PERMUTATIONS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// Emits six rows per input row, one per permutation of the three consumer
/// nodes applied jointly to their `tau`, `p` and `g` values. Node 1 and the
/// labels are copied unchanged; the identity permutation comes first.
pub fn augment_sixfold(d: &Dataset) -> Result<Dataset> {
    if d.n_features() != FEATURE_COUNT {
        return Err(Error::shape("augment_sixfold", FEATURE_COUNT, d.n_features()));
    }
    let n = d.len();
    let mut data = Vec::with_capacity(n * 6 * FEATURE_COUNT);
    let mut labels = Vec::with_capacity(n * 6);
    let mut stab = Vec::with_capacity(n * 6);
    let mut row_ids = Vec::with_capacity(n * 6);
    for r in 0..n {
        let row = d.features.row(r);
        for (k, perm) in CONSUMER_PERMUTATIONS.iter().enumerate() {
            let mut out = [0.0; FEATURE_COUNT];
            for block in 0..3 {
                let base = block * 4;
                out[base] = row[base];
                for (slot, &src) in perm.iter().enumerate() {
                    out[base + 1 + slot] = row[base + 1 + src];
                }
            }
            data.extend_from_slice(&out);
            labels.push(d.labels[r]);
            stab.push(d.stab[r]);
            row_ids.push(d.row_ids[r] * 6 + k);
        }
    }
    Ok(Dataset {
        features: Matrix::from_vec(n * 6, FEATURE_COUNT, data)?,
        labels,
        stab,
        feature_names: d.feature_names.clone(),
        row_ids,
    })
}

/// Stable-only training split with every unstable row held out for testing.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitBundle {
    pub train_stable: Dataset,
    pub test_stable: Dataset,
    pub test_unstable: Dataset,
}

impl SplitBundle {
    /// Stable test rows followed by unstable test rows.
    pub fn test_all(&self) -> Result<Dataset> {
        self.test_stable.concat(&self.test_unstable)
    }

    pub fn total(&self) -> usize {
        self.train_stable.len() + self.test_stable.len() + self.test_unstable.len()
    }
}

/// Shuffles the stable rows with `seed` and keeps `train_frac` of them for
/// training; the remaining stable rows and all unstable rows form the test
/// splits. Each split keeps its rows in original order.
pub fn split_stable_only(d: &Dataset, train_frac: f64, seed: u64) -> Result<SplitBundle> {
    if !(0.0..=1.0).contains(&train_frac) {
        return Err(Error::Argument(format!("train fraction {train_frac} outside [0, 1]")));
    }
    let mut stable: Vec<usize> = (0..d.len()).filter(|&i| d.labels[i] == Label::Stable).collect();
    if stable.is_empty() {
        return Err(Error::Argument("dataset has no stable rows".into()));
    }
    let unstable: Vec<usize> = (0..d.len()).filter(|&i| d.labels[i] == Label::Unstable).collect();
    stable.shuffle(&mut seeded_rng(seed));
    let n_train = (stable.len() as f64 * train_frac).round() as usize;
    let (train, test) = stable.split_at(n_train);
    let mut train = train.to_vec();
    let mut test = test.to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitBundle {
        train_stable: d.subset(&train),
        test_stable: d.subset(&test),
        test_unstable: d.subset(&unstable),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub window_size: usize,
    pub step: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            window_size: 16,
            step: 8,
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.step == 0 || self.step > self.window_size {
            return Err(Error::Argument(format!(
                "window step {} must lie in 1..={}",
                self.step, self.window_size
            )));
        }
        Ok(())
    }

    pub fn count(&self, n: usize) -> usize {
        if n < self.window_size {
            0
        } else {
            (n - self.window_size) / self.step + 1
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    /// Index of the first covered row.
    pub start: usize,
    /// `[window_size x features]`
    pub rows: Matrix,
    pub label: Label,
}

/// Majority label over `labels`; ties go to unstable.
pub fn majority_label(labels: &[Label]) -> Label {
    let stable = labels.iter().filter(|&&l| l == Label::Stable).count();
    if 2 * stable > labels.len() {
        Label::Stable
    } else {
        Label::Unstable
    }
}

/// Overlapping windows at offsets `0, step, 2*step, ...`, each labelled by
/// majority vote over its rows.
pub fn make_windows(d: &Dataset, cfg: WindowConfig) -> Result<Vec<Window>> {
    cfg.validate()?;
    if d.len() < cfg.window_size {
        return Err(Error::Argument(format!(
            "{} rows cannot fill a window of {}",
            d.len(),
            cfg.window_size
        )));
    }
    let count = cfg.count(d.len());
    let windows = (0..count)
        .map(|k| {
            let start = k * cfg.step;
            let idx: Vec<usize> = (start..start + cfg.window_size).collect();
            Window {
                start,
                rows: d.features.select_rows(&idx),
                label: majority_label(&d.labels[start..start + cfg.window_size]),
            }
        })
        .collect();
    Ok(windows)
}
