use serde::{Deserialize, Serialize};

use super::Parameterized;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    /// The conventional GAN setting: betas (0.5, 0.999).
    pub fn gan(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.5,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn standard(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Bias-corrected Adam. Moment buffers are created on the first step and
/// must keep matching the parameter tensors afterwards.
#[derive(Debug, Clone)]
pub struct AdamState {
    config: AdamConfig,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn config(&self) -> AdamConfig {
        self.config
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Applies one update to every parameter tensor of `model` using the
    /// gradients currently stored in it.
    pub fn step<P: Parameterized + ?Sized>(&mut self, model: &mut P) -> Result<()> {
        let first = self.t == 0 && self.m.is_empty();
        let t = self.t + 1;
        let AdamConfig {
            learning_rate: lr,
            beta1: b1,
            beta2: b2,
            epsilon: eps,
        } = self.config;
        let c1 = 1.0 - b1.powi(t as i32);
        let c2 = 1.0 - b2.powi(t as i32);

        let mut idx = 0usize;
        let mut error = None;
        let (m_all, v_all) = (&mut self.m, &mut self.v);
        model.visit_params(&mut |params, grads| {
            if error.is_some() {
                return;
            }
            if params.len() != grads.len() {
                error = Some(Error::shape("adam_step", params.len(), grads.len()));
                return;
            }
            if first {
                m_all.push(vec![0.0; params.len()]);
                v_all.push(vec![0.0; params.len()]);
            }
            let (Some(m), Some(v)) = (m_all.get_mut(idx), v_all.get_mut(idx)) else {
                error = Some(Error::shape("adam_step", "known tensor", format!("tensor {idx}")));
                return;
            };
            if m.len() != params.len() {
                error = Some(Error::shape("adam_step", m.len(), params.len()));
                return;
            }
            for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            idx += 1;
        });
        if let Some(e) = error {
            return Err(e);
        }
        if idx != self.m.len() {
            return Err(Error::shape("adam_step", self.m.len(), idx));
        }
        self.t = t;
        Ok(())
    }
}

/// Adapter for updating loose slices, mostly for tests and scalar problems.
pub struct SliceParams<'a> {
    pub params: Vec<&'a mut [f64]>,
    pub grads: Vec<&'a [f64]>,
}

impl Parameterized for SliceParams<'_> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut [f64], &[f64])) {
        for (p, g) in self.params.iter_mut().zip(&self.grads) {
            f(p, g);
        }
    }
}
