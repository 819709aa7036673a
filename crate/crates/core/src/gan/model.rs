use std::path::Path;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{DiscriminatorConfig, GeneratorConfig, TrainConfig};
use crate::checkpoint::{self, NetworkRecord, FORMAT_VERSION};
use crate::data::{Label, NormStats};
use crate::nn::{Matrix, Network};
use crate::{seeded_rng, Error, Result};

/// Scores at or above this are labelled stable.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

const MODEL_KIND: &str = "gan-stability";

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    /// Discriminator probability of "stable" per row.
    pub scores: Vec<f64>,
    pub labels: Vec<Label>,
}

impl Classification {
    pub fn from_scores(scores: Vec<f64>, threshold: f64) -> Self {
        let labels = scores
            .iter()
            .map(|&s| if s >= threshold { Label::Stable } else { Label::Unstable })
            .collect();
        Self { scores, labels }
    }

    pub fn fraction(&self, label: Label) -> f64 {
        if self.labels.is_empty() {
            return 0.0;
        }
        self.labels.iter().filter(|&&l| l == label).count() as f64 / self.labels.len() as f64
    }
}

/// Trained generator/discriminator pair plus the statistics that map raw
/// grid features into the space both networks work in.
#[derive(Debug, Clone)]
pub struct GanModel {
    pub generator_config: GeneratorConfig,
    pub discriminator_config: DiscriminatorConfig,
    generator: Network,
    discriminator: Network,
    norm_stats: NormStats,
    train_config: TrainConfig,
}

impl GanModel {
    pub(crate) fn from_parts(
        generator_config: GeneratorConfig,
        discriminator_config: DiscriminatorConfig,
        generator: Network,
        discriminator: Network,
        norm_stats: NormStats,
        train_config: TrainConfig,
    ) -> Self {
        Self {
            generator_config,
            discriminator_config,
            generator,
            discriminator,
            norm_stats,
            train_config,
        }
    }

    pub fn generator(&self) -> &Network {
        &self.generator
    }

    pub fn discriminator(&self) -> &Network {
        &self.discriminator
    }

    /// Mutable discriminator, for attacks that need its input gradients.
    pub fn discriminator_mut(&mut self) -> &mut Network {
        &mut self.discriminator
    }

    pub fn norm_stats(&self) -> &NormStats {
        &self.norm_stats
    }

    pub fn train_config(&self) -> &TrainConfig {
        &self.train_config
    }

    pub fn seed(&self) -> u64 {
        self.train_config.seed
    }

    pub fn margin(&self) -> f64 {
        self.train_config.margin
    }

    /// Stable-probability scores for rows already in normalized units.
    pub fn scores_normalized(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.discriminator.input_dim() {
            return Err(Error::shape(
                "GanModel::classify",
                self.discriminator.input_dim(),
                x.cols(),
            ));
        }
        Ok(self.discriminator.predict(x)?.into_vec())
    }

    pub fn classify_normalized(&self, x: &Matrix, threshold: f64) -> Result<Classification> {
        Ok(Classification::from_scores(self.scores_normalized(x)?, threshold))
    }

    /// Classifies rows given in raw feature units.
    pub fn classify(&self, x_raw: &Matrix) -> Result<Classification> {
        self.classify_with_threshold(x_raw, DEFAULT_THRESHOLD)
    }

    pub fn classify_with_threshold(&self, x_raw: &Matrix, threshold: f64) -> Result<Classification> {
        if x_raw.cols() != self.norm_stats.dim() {
            return Err(Error::shape("GanModel::classify", self.norm_stats.dim(), x_raw.cols()));
        }
        let x = self.norm_stats.apply_matrix(x_raw)?;
        self.classify_normalized(&x, threshold)
    }

    /// Draws `n` rows from the generator (normalized units).
    pub fn sample(&self, n: usize, seed: u64) -> Result<Matrix> {
        let mut rng = seeded_rng(seed);
        let dim = self.generator_config.latent_dim;
        let z = (0..n * dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        self.generator.predict(&Matrix::from_vec(n, dim, z)?)
    }

    /// Fraction of `n_samples` generated rows whose nearest row of
    /// `stable_ref` (normalized) lies at least the margin away.
    pub fn ood_margin_fraction(&self, stable_ref: &Matrix, n_samples: usize, seed: u64) -> Result<f64> {
        let samples = self.sample(n_samples, seed)?;
        min_distance_fraction(&samples, stable_ref, self.margin())
    }

    pub fn to_json(&self) -> Result<String> {
        checkpoint::encode(&GanCheckpoint {
            format_version: FORMAT_VERSION,
            model_kind: MODEL_KIND.to_string(),
            generator_config: self.generator_config.clone(),
            discriminator_config: self.discriminator_config.clone(),
            generator: NetworkRecord::from_network(&self.generator),
            discriminator: NetworkRecord::from_network(&self.discriminator),
            norm_stats: self.norm_stats.clone(),
            train_config: self.train_config.clone(),
            seed: self.train_config.seed,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: GanCheckpoint = checkpoint::decode(text, MODEL_KIND)?;
        let generator = ck.generator.to_network()?;
        let discriminator = ck.discriminator.to_network()?;
        if generator.input_dim() != ck.generator_config.latent_dim
            || generator.output_dim() != ck.generator_config.output_dim
            || discriminator.input_dim() != ck.discriminator_config.input_dim
            || discriminator.output_dim() != 1
            || ck.norm_stats.dim() != discriminator.input_dim()
        {
            return Err(Error::Checkpoint(
                "network shapes disagree with the stored configs".into(),
            ));
        }
        if ck.seed != ck.train_config.seed {
            return Err(Error::Checkpoint("seed disagrees with the stored train config".into()));
        }
        Ok(Self {
            generator_config: ck.generator_config,
            discriminator_config: ck.discriminator_config,
            generator,
            discriminator,
            norm_stats: ck.norm_stats,
            train_config: ck.train_config,
        })
    }

    pub fn save_checkpoint(&self, path: impl AsRef<Path>) -> Result<()> {
        checkpoint::write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&checkpoint::read_text(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct GanCheckpoint {
    format_version: u32,
    model_kind: String,
    generator_config: GeneratorConfig,
    discriminator_config: DiscriminatorConfig,
    generator: NetworkRecord,
    discriminator: NetworkRecord,
    norm_stats: NormStats,
    train_config: TrainConfig,
    seed: u64,
}

/// Fraction of `samples` rows whose minimum Euclidean distance to any row of
/// `reference` is at least `margin`.
pub fn min_distance_fraction(samples: &Matrix, reference: &Matrix, margin: f64) -> Result<f64> {
    if samples.cols() != reference.cols() {
        return Err(Error::shape("min_distance_fraction", reference.cols(), samples.cols()));
    }
    if samples.rows() == 0 {
        return Err(Error::Argument("no samples".into()));
    }
    let m2 = margin * margin;
    let outside = samples
        .iter_rows()
        .filter(|x| {
            reference.iter_rows().all(|s| {
                let d2: f64 = x.iter().zip(s).map(|(a, b)| (a - b) * (a - b)).sum();
                d2 >= m2
            })
        })
        .count();
    Ok(outside as f64 / samples.rows() as f64)
}
