//! Query-only generative attacker: a generator trained with REINFORCE to
//! emit rows the oracle labels stable.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::gan::{GanModel, GeneratorConfig};
use crate::nn::{AdamConfig, AdamState, Matrix, Network};
use crate::{seeded_rng, Error, Result};

/// What an oracle reveals about one row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleVerdict {
    pub label: Label,
    /// Probability of "stable", when the oracle exposes it.
    pub score: Option<f64>,
}

/// Black-box access to a classifier over raw feature rows.
pub trait QueryOracle {
    fn feature_dim(&self) -> usize;

    fn query(&mut self, x_raw: &Matrix) -> Result<Vec<OracleVerdict>>;

    /// Rows submitted so far.
    fn queries(&self) -> u64;
}

/// Oracle over a trained model. Only the verdicts leave this type.
pub struct ModelOracle<'a> {
    model: &'a GanModel,
    expose_scores: bool,
    queries: u64,
}

impl<'a> ModelOracle<'a> {
    pub fn new(model: &'a GanModel, expose_scores: bool) -> Self {
        Self {
            model,
            expose_scores,
            queries: 0,
        }
    }
}

impl QueryOracle for ModelOracle<'_> {
    fn feature_dim(&self) -> usize {
        self.model.norm_stats().dim()
    }

    fn query(&mut self, x_raw: &Matrix) -> Result<Vec<OracleVerdict>> {
        let c = self.model.classify(x_raw)?;
        self.queries += x_raw.rows() as u64;
        Ok(c.labels
            .into_iter()
            .zip(c.scores)
            .map(|(label, s)| OracleVerdict {
                label,
                score: self.expose_scores.then_some(s),
            })
            .collect())
    }

    fn queries(&self) -> u64 {
        self.queries
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GanGridConfig {
    pub generator: GeneratorConfig,
    pub episodes: usize,
    pub samples_per_episode: usize,
    pub learning_rate: f64,
    /// Std of the Gaussian policy around the generator output (raw units).
    pub exploration_sigma: f64,
    /// Weight of the old value in the moving-average reward baseline.
    pub baseline_decay: f64,
    pub seed: u64,
}

impl Default for GanGridConfig {
    fn default() -> Self {
        Self {
            generator: GeneratorConfig::default(),
            episodes: 300,
            samples_per_episode: 32,
            learning_rate: 1e-3,
            exploration_sigma: 0.5,
            baseline_decay: 0.9,
            seed: 0,
        }
    }
}

impl GanGridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 || self.samples_per_episode == 0 {
            return Err(Error::Config("gan-grid needs >= 1 episode and sample".into()));
        }
        if !(self.exploration_sigma > 0.0) || !(self.learning_rate > 0.0) {
            return Err(Error::Config("gan-grid sigma and learning rate must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.baseline_decay) {
            return Err(Error::Config(format!(
                "baseline_decay must lie in [0, 1), got {}",
                self.baseline_decay
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GanGridResult {
    /// Generator of the episode with the highest success rate.
    pub generator: Network,
    pub best_episode: usize,
    /// Fraction of that episode's queries labelled stable.
    pub success_rate: f64,
    pub queries: u64,
    pub episode_success: Vec<f64>,
    pub latent_dim: usize,
}

impl GanGridResult {
    /// Policy means `G(z)` for `n` fresh latent draws (raw units).
    pub fn samples(&self, n: usize, seed: u64) -> Result<Matrix> {
        let mut rng = seeded_rng(seed);
        let z = (0..n * self.latent_dim)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        self.generator.predict(&Matrix::from_vec(n, self.latent_dim, z)?)
    }
}

fn reward(v: &OracleVerdict) -> f64 {
    match v.score {
        Some(s) => s,
        None => (v.label == Label::Stable) as u8 as f64,
    }
}

/// REINFORCE with a Gaussian policy `x ~ N(G(z), sigma^2 I)` and a
/// moving-average baseline. Runs the full episode budget and returns the
/// best generator seen.
pub fn gan_grid_train(oracle: &mut dyn QueryOracle, cfg: &GanGridConfig) -> Result<GanGridResult> {
    cfg.validate()?;
    if cfg.generator.output_dim != oracle.feature_dim() {
        return Err(Error::shape(
            "gan_grid_train",
            oracle.feature_dim(),
            cfg.generator.output_dim,
        ));
    }
    let mut rng = seeded_rng(cfg.seed);
    let latent = cfg.generator.latent_dim;
    let n = cfg.samples_per_episode;
    let sigma = cfg.exploration_sigma;
    let mut gen = Network::glorot(latent, &cfg.generator.layer_spec(), &mut rng)?;
    let mut adam = AdamState::new(AdamConfig::standard(cfg.learning_rate));
    let mut baseline: Option<f64> = None;
    let mut best: Option<(f64, usize, Network)> = None;
    let mut history = Vec::with_capacity(cfg.episodes);

    for episode in 0..cfg.episodes {
        let z: Vec<f64> = (0..n * latent).map(|_| StandardNormal.sample(&mut rng)).collect();
        let z = Matrix::from_vec(n, latent, z)?;
        let mean = gen.forward(&z)?.clone();
        let noise = mean.map(|_| StandardNormal.sample(&mut rng));
        let x = mean.zip_map(&noise, |m, e| m + sigma * e)?;

        let verdicts = oracle.query(&x)?;
        if verdicts.len() != n {
            return Err(Error::shape("oracle verdicts", n, verdicts.len()));
        }
        let rewards: Vec<f64> = verdicts.iter().map(reward).collect();
        let success = verdicts.iter().filter(|v| v.label == Label::Stable).count() as f64 / n as f64;
        history.push(success);
        if best.as_ref().is_none_or(|(s, _, _)| success > *s) {
            best = Some((success, episode, gen.clone()));
        }

        let mean_r = rewards.iter().sum::<f64>() / n as f64;
        let b = *baseline.get_or_insert(mean_r);
        // d/dmu of -(r - b) log N(x; mu, sigma) = -(r - b) (x - mu) / sigma^2
        let mut grad = noise;
        for (r, row) in rewards.iter().zip(0..n) {
            let scale = -(r - b) / (sigma * n as f64);
            grad.row_mut(row).iter_mut().for_each(|e| *e *= scale);
        }
        gen.backward(&grad)?;
        adam.step(&mut gen)?;
        if !gen.layers().iter().all(|l| l.weights().is_finite()) {
            return Err(Error::NonFinite {
                what: "gan-grid generator",
                epoch: episode,
                batch: 0,
            });
        }
        baseline = Some(cfg.baseline_decay * b + (1.0 - cfg.baseline_decay) * mean_r);
    }

    let (success_rate, best_episode, generator) = best.expect("episodes >= 1");
    Ok(GanGridResult {
        generator,
        best_episode,
        success_rate,
        queries: oracle.queries(),
        episode_success: history,
        latent_dim: latent,
    })
}
