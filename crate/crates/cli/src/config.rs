//! Experiment configuration: one JSON document whose every key can be
//! overridden by a `--dotted.key value` flag.

use std::path::PathBuf;

use gan_stability::attacks::{AttackConfig, AttackKind, GanGridConfig};
use gan_stability::eval::{Scenario, TimingConfig};
use gan_stability::gan::{DiscriminatorConfig, GeneratorConfig, TrainConfig};
use gan_stability::surrogate::SurrogateConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub dataset: Option<PathBuf>,
    pub out: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            dataset: None,
            out: PathBuf::from("runs/default"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Augment {
    /// Augment exactly when the input has the original 10,000 rows.
    #[default]
    Auto,
    Always,
    Never,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSettings {
    /// Fraction of stable rows used for GAN training.
    pub train_frac: f64,
    pub augment: Augment,
    /// Rows kept (after augmentation) in quick mode.
    pub quick_rows: usize,
}

impl Default for DataSettings {
    fn default() -> Self {
        Self {
            train_frac: 0.9,
            augment: Augment::Auto,
            quick_rows: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GanSettings {
    pub generator: GeneratorConfig,
    pub discriminator: DiscriminatorConfig,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub gan_grid_samples: usize,
    pub expose_scores: bool,
    pub roc_thresholds: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            gan_grid_samples: 1000,
            expose_scores: true,
            roc_thresholds: 101,
        }
    }
}

/// Which attacks and scenarios a command runs. Not part of the config hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Selection {
    pub attacks: Vec<AttackKind>,
    pub scenarios: Vec<Scenario>,
}

impl Default for Selection {
    fn default() -> Self {
        Self {
            attacks: AttackKind::ALL.to_vec(),
            scenarios: vec![Scenario::WhiteBox, Scenario::GreyBox1, Scenario::GreyBox2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub paths: Paths,
    pub seed: u64,
    /// Small, fast run for CI; results are not comparable with full runs.
    pub quick: bool,
    pub data: DataSettings,
    pub gan: GanSettings,
    pub attack: AttackConfig,
    pub gan_grid: GanGridConfig,
    pub surrogate: SurrogateConfig,
    pub evaluation: EvalSettings,
    pub timing: TimingConfig,
    pub selection: Selection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            paths: Paths::default(),
            seed: 0,
            quick: false,
            data: DataSettings::default(),
            gan: GanSettings::default(),
            attack: AttackConfig::default(),
            gan_grid: GanGridConfig::default(),
            surrogate: SurrogateConfig::default(),
            evaluation: EvalSettings::default(),
            timing: TimingConfig::default(),
            selection: Selection::default(),
        }
    }
}

impl ExperimentConfig {
    /// Applies quick-mode reductions and propagates the global seed.
    pub fn finalize(mut self) -> Result<Self, CliError> {
        if self.quick {
            self.gan.train.epochs = self.gan.train.epochs.min(10);
            self.surrogate.epochs = self.surrogate.epochs.min(3);
            self.gan_grid.episodes = self.gan_grid.episodes.min(60);
            self.evaluation.gan_grid_samples = self.evaluation.gan_grid_samples.min(500);
        }
        self.gan.train.seed = self.seed;
        self.surrogate.seed = self.seed;
        self.gan_grid.seed = self.seed;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.gan.train.validate()?;
        self.attack.validate()?;
        self.gan_grid.validate()?;
        self.surrogate.validate()?;
        if !(self.data.train_frac > 0.0 && self.data.train_frac < 1.0) {
            return Err(CliError::Usage(format!(
                "data.train_frac must lie in (0, 1), got {}",
                self.data.train_frac
            )));
        }
        if self.gan.generator.output_dim != self.gan.discriminator.input_dim {
            return Err(CliError::Usage(
                "gan.generator.output_dim must equal gan.discriminator.input_dim".into(),
            ));
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON of everything that shapes results:
    /// paths, the adversarial-layer switch and the attack/scenario
    /// selection are left out so all stages of one experiment share it.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        let obj = v.as_object_mut().expect("config is an object");
        obj.remove("paths");
        obj.remove("selection");
        if let Some(train) = obj
            .get_mut("gan")
            .and_then(|g| g.get_mut("train"))
            .and_then(Value::as_object_mut)
        {
            train.remove("adversarial_layer");
        }
        // serde_json maps are ordered, so this text is canonical
        let text = serde_json::to_string(&v).expect("value serializes");
        format!("{:x}", Sha256::digest(text.as_bytes()))
    }
}

/// Sets `path` (dot separated) in `root` to `raw`, parsed as JSON when it
/// is valid JSON and kept as a string otherwise. The key must exist.
pub fn apply_override(root: &mut Value, path: &str, raw: &str) -> Result<(), CliError> {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| CliError::Usage(format!("--{path}: '{}' is not a section", parts[..i].join("."))))?;
        cur = obj
            .get_mut(*part)
            .ok_or_else(|| CliError::Usage(format!("--{path}: unknown configuration key")))?;
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    *cur = value;
    Ok(())
}

/// Loads the config file (or defaults) and applies dotted overrides in
/// order.
pub fn load(path: Option<&std::path::Path>, overrides: &[(String, String)]) -> Result<ExperimentConfig, CliError> {
    let base: ExperimentConfig = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", p.display())))?
        }
        None => ExperimentConfig::default(),
    };
    let mut value = serde_json::to_value(&base).expect("config serializes");
    for (k, v) in overrides {
        apply_override(&mut value, k, v)?;
    }
    serde_json::from_value(value).map_err(|e| CliError::Usage(format!("invalid configuration: {e}")))
}
