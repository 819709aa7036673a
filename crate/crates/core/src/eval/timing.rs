use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::NormStats;
use crate::gan::{DiscriminatorConfig, GeneratorConfig, TrainConfig, Trainer};
use crate::nn::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation (0 for a single value).
    pub std: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n.max(1) as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std, n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimingConfig {
    pub repetitions: usize,
    pub warmup: usize,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            repetitions: 10,
            warmup: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub rows: usize,
    pub batch_size: usize,
    pub epoch_with_adversarial_layer: Stat,
    pub epoch_without_adversarial_layer: Stat,
    pub inference_batch_ms: Stat,
}

/// Times one training epoch over `x` (normalized stable rows) with and
/// without the adversarial layer, each from the same seed, and the
/// discriminator's latency on one batch.
pub fn bench_timing(
    x: &Matrix,
    norm_stats: &NormStats,
    gen_cfg: &GeneratorConfig,
    disc_cfg: &DiscriminatorConfig,
    train_cfg: &TrainConfig,
    cfg: &TimingConfig,
) -> Result<TimingReport> {
    if cfg.repetitions == 0 {
        return Err(Error::Config("timing needs at least one repetition".into()));
    }
    let epoch = |adversarial_layer: bool| -> Result<Stat> {
        let tc = TrainConfig {
            adversarial_layer,
            ..train_cfg.clone()
        };
        let mut times = Vec::with_capacity(cfg.repetitions);
        for rep in 0..cfg.warmup + cfg.repetitions {
            let mut trainer = Trainer::new(gen_cfg.clone(), disc_cfg.clone(), tc.clone(), norm_stats.clone())?;
            let start = Instant::now();
            trainer.run_epoch(x)?;
            if rep >= cfg.warmup {
                times.push(start.elapsed().as_secs_f64());
            }
        }
        Ok(Stat::of(&times))
    };
    let with_at = epoch(true)?;
    let without_at = epoch(false)?;

    let trainer = Trainer::new(gen_cfg.clone(), disc_cfg.clone(), train_cfg.clone(), norm_stats.clone())?;
    let model = trainer.model();
    let n = train_cfg.batch_size.min(x.rows()).max(1);
    let batch = x.select_rows(&(0..n).map(|i| i % x.rows().max(1)).collect::<Vec<_>>());
    let mut lat = Vec::with_capacity(cfg.repetitions);
    for rep in 0..cfg.warmup + cfg.repetitions {
        let start = Instant::now();
        std::hint::black_box(model.scores_normalized(&batch)?);
        if rep >= cfg.warmup {
            lat.push(start.elapsed().as_secs_f64() * 1e3);
        }
    }
    Ok(TimingReport {
        rows: x.rows(),
        batch_size: n,
        epoch_with_adversarial_layer: with_at,
        epoch_without_adversarial_layer: without_at,
        inference_batch_ms: Stat::of(&lat),
    })
}
