//! The GAN stability model: architectures, the repulsion-loss trainer with
//! its optional adversarial layer, discriminator-as-classifier inference and
//! checkpoints.

mod model;
mod repulsion;
mod trainer;

use serde::{Deserialize, Serialize};

use crate::nn::Activation;
use crate::{Error, Result};

pub use model::{min_distance_fraction, Classification, GanModel, DEFAULT_THRESHOLD};
pub use repulsion::repulsion_loss;
pub use trainer::{generator_loss, train, train_with, EpochRecord, Phase, TrainReport, Trainer};

/// Slope of the leaky ReLU used in every hidden layer of both networks.
pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub latent_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            latent_dim: 100,
            hidden: vec![128, 64],
            output_dim: 12,
        }
    }
}

impl GeneratorConfig {
    /// Hidden layers leaky-ReLU, linear output (targets are z-scores).
    pub fn layer_spec(&self) -> Vec<(usize, Activation)> {
        self.hidden
            .iter()
            .map(|&w| (w, Activation::leaky_relu(LEAKY_SLOPE)))
            .chain(std::iter::once((self.output_dim, Activation::Linear)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorConfig {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self {
            input_dim: 12,
            hidden: vec![160, 200, 256, 512],
        }
    }
}

impl DiscriminatorConfig {
    /// Hidden layers leaky-ReLU, single sigmoid output.
    pub fn layer_spec(&self) -> Vec<(usize, Activation)> {
        self.hidden
            .iter()
            .map(|&w| (w, Activation::leaky_relu(LEAKY_SLOPE)))
            .chain(std::iter::once((1, Activation::Sigmoid)))
            .collect()
    }
}

/// Which sign the adversarial term of the generator objective takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorObjective {
    /// `-E[log D(G(z))] + repulsion`
    #[default]
    NonSaturating,
    /// `+E[log D(G(z))] + repulsion`, as literally written in the training
    /// listing; kept for sensitivity runs.
    LogD,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Repulsion margin in normalized feature units.
    pub margin: f64,
    /// FGSM step used by the adversarial layer.
    pub fgsm_epsilon: f64,
    pub adversarial_layer: bool,
    pub generator_objective: GeneratorObjective,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 250,
            learning_rate: 2e-4,
            batch_size: 4,
            margin: 4.0,
            fgsm_epsilon: 0.05,
            adversarial_layer: true,
            generator_objective: GeneratorObjective::NonSaturating,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.margin > 0.0) {
            return Err(Error::Config(format!("margin must be > 0, got {}", self.margin)));
        }
        if !(self.fgsm_epsilon >= 0.0) {
            return Err(Error::Config(format!(
                "fgsm_epsilon must be >= 0, got {}",
                self.fgsm_epsilon
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}
