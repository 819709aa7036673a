//! Schema-compatible stand-in data for tests and smoke runs.
//!
//! Rows follow the value ranges of the public grid-stability file
//! (`tau` in [0.5, 10], consumer `p` in [-2, -0.5] with the producer
//! balancing them, `g` in [0.05, 1]) but the label comes from a simple proxy
//! score, not from any grid dynamics: a row is stable when the mean of
//! `g_j * tau_j` is below [`PROXY_THRESHOLD`]. The proxy is symmetric in the
//! consumer nodes, so sixfold augmentation keeps labels valid. Roughly 36%
//! of rows come out stable.

use rand::Rng;

use super::{Dataset, GridSample, Label};
use crate::seeded_rng;

pub const PROXY_THRESHOLD: f64 = 2.45;

pub fn proxy_stab(tau: &[f64; 4], g: &[f64; 4]) -> f64 {
    let mean: f64 = tau.iter().zip(g).map(|(t, g)| t * g).sum::<f64>() / 4.0;
    (mean - PROXY_THRESHOLD) / 100.0
}

pub fn synthetic_samples(n: usize, seed: u64) -> Vec<GridSample> {
    let mut rng = seeded_rng(seed);
    (0..n)
        .map(|_| {
            let tau: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.5..10.0));
            let mut p = [0.0; 4];
            for v in &mut p[1..] {
                *v = rng.random_range(-2.0..-0.5);
            }
            p[0] = -(p[1] + p[2] + p[3]);
            let g: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.05..1.0));
            let mut stab = proxy_stab(&tau, &g);
            if stab == 0.0 {
                stab = f64::MIN_POSITIVE;
            }
            GridSample {
                tau,
                p,
                g,
                stab,
                stabf: if stab < 0.0 { Label::Stable } else { Label::Unstable },
            }
        })
        .collect()
}

pub fn synthetic_grid(n: usize, seed: u64) -> Dataset {
    Dataset::from_samples(&synthetic_samples(n, seed))
}
