//! Evasion attacks: the FGSM family against gradient-exposing models, the
//! query-only GAN-GRID attacker, and perturbation-budget checks.
//!
//! All gradient attacks maximise the model's BCE against the true label
//! under an L-infinity budget measured in the model's (normalized) input
//! units.

mod export;
mod gan_grid;

use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Label, NormStats};
use crate::nn::{bce_loss, Matrix, Network};
use crate::{seeded_rng, Error, Result};

pub use export::{read_batch_csv, write_batch_csv, BatchSidecar, ExportedBatch};
pub use gan_grid::{gan_grid_train, GanGridConfig, GanGridResult, ModelOracle, OracleVerdict, QueryOracle};

/// Slack allowed on top of the budget for floating-point rounding.
pub const BUDGET_TOL: f64 = 1e-9;

/// Rows per gradient call; attacks are row-independent so chunking does not
/// change the result beyond the mean-loss scale, which the sign discards.
const CHUNK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    Fgsm,
    Bim,
    Rfgsm,
    Pgd,
    GanGrid,
}

impl AttackKind {
    pub const GRADIENT: [AttackKind; 4] = [AttackKind::Fgsm, AttackKind::Bim, AttackKind::Rfgsm, AttackKind::Pgd];
    pub const ALL: [AttackKind; 5] = [
        AttackKind::Fgsm,
        AttackKind::Bim,
        AttackKind::Rfgsm,
        AttackKind::Pgd,
        AttackKind::GanGrid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttackKind::Fgsm => "fgsm",
            AttackKind::Bim => "bim",
            AttackKind::Rfgsm => "rfgsm",
            AttackKind::Pgd => "pgd",
            AttackKind::GanGrid => "gan-grid",
        }
    }

    /// Column heading used in report tables.
    pub fn title(self) -> &'static str {
        match self {
            AttackKind::Fgsm => "FGSM",
            AttackKind::Bim => "BIM",
            AttackKind::Rfgsm => "RFGSM",
            AttackKind::Pgd => "PGD",
            AttackKind::GanGrid => "GAN-GRID",
        }
    }

    pub fn is_gradient(self) -> bool {
        self != AttackKind::GanGrid
    }
}

impl FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AttackKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| {
                let valid: Vec<&str> = AttackKind::ALL.iter().map(|k| k.name()).collect();
                Error::Argument(format!("unknown attack '{s}' (valid: {})", valid.join(", ")))
            })
    }
}

impl std::fmt::Display for AttackKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackConfig {
    /// L-infinity budget.
    pub epsilon: f64,
    /// Per-iteration step of the iterative attacks.
    pub alpha: f64,
    /// Gradient steps of BIM/RFGSM/PGD; 0 leaves only the random start.
    pub iterations: usize,
    /// RFGSM random-step size, taken out of the budget.
    pub noise_sigma: f64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self::with_epsilon(0.05)
    }
}

impl AttackConfig {
    /// Defaults relative to `epsilon`: 10 iterations of `eps / 4`, RFGSM
    /// noise `eps / 2`.
    pub fn with_epsilon(epsilon: f64) -> Self {
        Self {
            epsilon,
            alpha: epsilon / 4.0,
            iterations: 10,
            noise_sigma: epsilon / 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::Argument(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if !(0.0..=self.epsilon).contains(&self.alpha) {
            return Err(Error::Argument(format!(
                "alpha {} must lie in [0, epsilon = {}]",
                self.alpha, self.epsilon
            )));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::Argument(format!(
                "noise_sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

/// A model whose training-loss gradient w.r.t. its input can be queried.
pub trait GradientModel {
    fn input_dim(&self) -> usize;

    /// Gradient of the mean BCE against `targets` (1 = stable) w.r.t. `x`.
    fn loss_input_grad(&mut self, x: &Matrix, targets: &[f64]) -> Result<Matrix>;
}

/// A sigmoid-headed network treated as a stable-probability classifier.
impl GradientModel for Network {
    fn input_dim(&self) -> usize {
        Network::input_dim(self)
    }

    fn loss_input_grad(&mut self, x: &Matrix, targets: &[f64]) -> Result<Matrix> {
        let out = self.forward(x)?;
        let (_, grad) = bce_loss(out, targets)?;
        self.input_gradient(&grad)
    }
}

#[inline]
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `x + eps * sign(grad)` with `sign(0) = 0`.
pub fn signed_step(x: &Matrix, grad: &Matrix, eps: f64) -> Result<Matrix> {
    x.zip_map(grad, |v, g| v + eps * sign(g))
}

/// Adversarial rows together with the clean rows they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialBatch {
    pub attack: AttackKind,
    /// `None` for generative attacks that have no clean originals.
    pub x_clean: Option<Matrix>,
    pub x_adv: Matrix,
    pub true_labels: Vec<Label>,
    pub config: AttackConfig,
    pub seed: u64,
    /// Statistics of the space `x_clean`/`x_adv` live in; used to export raw
    /// units.
    pub norm_stats: Option<NormStats>,
}

impl AdversarialBatch {
    pub fn len(&self) -> usize {
        self.x_adv.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.x_adv.rows() == 0
    }

    pub fn with_norm_stats(mut self, stats: NormStats) -> Self {
        self.norm_stats = Some(stats);
        self
    }

    /// Adversarial rows in raw units (identity when no statistics attached).
    pub fn adv_raw(&self) -> Result<Matrix> {
        match &self.norm_stats {
            Some(s) => s.inverse_matrix(&self.x_adv),
            None => Ok(self.x_adv.clone()),
        }
    }
}

fn targets_of(labels: &[Label]) -> Vec<f64> {
    labels.iter().map(|l| l.target()).collect()
}

fn check_inputs<M: GradientModel + ?Sized>(model: &M, x: &Matrix, labels: &[Label]) -> Result<()> {
    if x.cols() != model.input_dim() {
        return Err(Error::shape("attack input", model.input_dim(), x.cols()));
    }
    if x.rows() != labels.len() {
        return Err(Error::shape("attack labels", x.rows(), labels.len()));
    }
    Ok(())
}

/// Runs `f` over row chunks and stacks the outputs.
fn chunked(x: &Matrix, labels: &[Label], mut f: impl FnMut(&Matrix, &[f64]) -> Result<Matrix>) -> Result<Matrix> {
    let mut out = Vec::with_capacity(x.data().len());
    let idx: Vec<usize> = (0..x.rows()).collect();
    for chunk in idx.chunks(CHUNK) {
        let part = x.select_rows(chunk);
        let t: Vec<f64> = targets_of(&chunk.iter().map(|&i| labels[i]).collect::<Vec<_>>());
        out.extend_from_slice(f(&part, &t)?.data());
    }
    Matrix::from_vec(x.rows(), x.cols(), out)
}

/// Iterated signed-gradient steps projected onto the box
/// `[center - radius, center + radius]`.
fn projected_steps<M: GradientModel + ?Sized>(
    model: &mut M,
    start: Matrix,
    center: &Matrix,
    radius: f64,
    alpha: f64,
    iterations: usize,
    targets: &[f64],
    on_iterate: &mut dyn FnMut(&Matrix),
) -> Result<Matrix> {
    let mut cur = start;
    for _ in 0..iterations {
        let g = model.loss_input_grad(&cur, targets)?;
        let data = cur.data_mut();
        for ((v, &gv), &c) in data.iter_mut().zip(g.data()).zip(center.data()) {
            let cand = *v + alpha * sign(gv);
            *v = cand.clamp(c - radius, c + radius);
        }
        on_iterate(&cur);
    }
    Ok(cur)
}

fn batch(
    attack: AttackKind,
    x: &Matrix,
    x_adv: Matrix,
    labels: &[Label],
    config: AttackConfig,
    seed: u64,
) -> AdversarialBatch {
    AdversarialBatch {
        attack,
        x_clean: Some(x.clone()),
        x_adv,
        true_labels: labels.to_vec(),
        config,
        seed,
        norm_stats: None,
    }
}

/// Single signed-gradient step of size `eps`.
pub fn fgsm<M: GradientModel + ?Sized>(
    model: &mut M,
    x: &Matrix,
    labels: &[Label],
    eps: f64,
) -> Result<AdversarialBatch> {
    check_inputs(model, x, labels)?;
    let config = AttackConfig {
        epsilon: eps,
        alpha: eps,
        iterations: 1,
        noise_sigma: 0.0,
    };
    config.validate()?;
    let adv = chunked(x, labels, |part, t| {
        let g = model.loss_input_grad(part, t)?;
        signed_step(part, &g, eps)
    })?;
    Ok(batch(AttackKind::Fgsm, x, adv, labels, config, 0))
}

/// Basic iterative method: `iterations` steps of `alpha`, clipped to the
/// `epsilon` box around the clean rows.
pub fn bim<M: GradientModel + ?Sized>(
    model: &mut M,
    x: &Matrix,
    labels: &[Label],
    cfg: &AttackConfig,
) -> Result<AdversarialBatch> {
    check_inputs(model, x, labels)?;
    cfg.validate()?;
    let adv = chunked(x, labels, |part, t| {
        projected_steps(
            model,
            part.clone(),
            part,
            cfg.epsilon,
            cfg.alpha,
            cfg.iterations,
            t,
            &mut |_| {},
        )
    })?;
    Ok(batch(AttackKind::Bim, x, adv, labels, *cfg, 0))
}

/// Random signed step of `noise_sigma`, then BIM iterations confined to the
/// remaining `epsilon - noise_sigma` around the randomized point.
pub fn rfgsm<M: GradientModel + ?Sized>(
    model: &mut M,
    x: &Matrix,
    labels: &[Label],
    cfg: &AttackConfig,
    seed: u64,
) -> Result<AdversarialBatch> {
    check_inputs(model, x, labels)?;
    cfg.validate()?;
    if cfg.noise_sigma > cfg.epsilon {
        return Err(Error::Argument(format!(
            "noise_sigma {} exceeds epsilon {}",
            cfg.noise_sigma, cfg.epsilon
        )));
    }
    let mut rng = seeded_rng(seed);
    let remaining = cfg.epsilon - cfg.noise_sigma;
    let adv = chunked(x, labels, |part, t| {
        let noisy = part.map(|v| {
            let n: f64 = StandardNormal.sample(&mut rng);
            v + cfg.noise_sigma * sign(n)
        });
        projected_steps(
            model,
            noisy.clone(),
            &noisy,
            remaining,
            cfg.alpha,
            cfg.iterations,
            t,
            &mut |_| {},
        )
    })?;
    Ok(batch(AttackKind::Rfgsm, x, adv, labels, *cfg, seed))
}

/// Projected gradient descent from a uniform random start in the box.
pub fn pgd<M: GradientModel + ?Sized>(
    model: &mut M,
    x: &Matrix,
    labels: &[Label],
    cfg: &AttackConfig,
    seed: u64,
) -> Result<AdversarialBatch> {
    pgd_traced(model, x, labels, cfg, seed, &mut |_| {})
}

/// [`pgd`] that reports every iterate (chunk by chunk) to `on_iterate`.
pub fn pgd_traced<M: GradientModel + ?Sized>(
    model: &mut M,
    x: &Matrix,
    labels: &[Label],
    cfg: &AttackConfig,
    seed: u64,
    on_iterate: &mut dyn FnMut(&Matrix),
) -> Result<AdversarialBatch> {
    check_inputs(model, x, labels)?;
    cfg.validate()?;
    let mut rng = seeded_rng(seed);
    let eps = cfg.epsilon;
    let adv = chunked(x, labels, |part, t| {
        let start = part.map(|v| {
            let u: f64 = rng.random();
            (v + eps * (2.0 * u - 1.0)).clamp(v - eps, v + eps)
        });
        on_iterate(&start);
        projected_steps(model, start, part, eps, cfg.alpha, cfg.iterations, t, on_iterate)
    })?;
    Ok(batch(AttackKind::Pgd, x, adv, labels, *cfg, seed))
}

/// Dispatches one of the gradient attacks by kind. FGSM uses `epsilon`
/// as its step.
pub fn run_gradient_attack<M: GradientModel + ?Sized>(
    kind: AttackKind,
    model: &mut M,
    x: &Matrix,
    labels: &[Label],
    cfg: &AttackConfig,
    seed: u64,
) -> Result<AdversarialBatch> {
    match kind {
        AttackKind::Fgsm => fgsm(model, x, labels, cfg.epsilon).map(|mut b| {
            b.config = *cfg;
            b
        }),
        AttackKind::Bim => bim(model, x, labels, cfg),
        AttackKind::Rfgsm => rfgsm(model, x, labels, cfg, seed),
        AttackKind::Pgd => pgd(model, x, labels, cfg, seed),
        AttackKind::GanGrid => Err(Error::Argument("gan-grid is query-based; use gan_grid_train".into())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub budget: f64,
    pub linf: Vec<f64>,
    pub l2: Vec<f64>,
    pub max_linf: f64,
    pub violations: Vec<usize>,
}

impl BudgetReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<Self> {
        if self.passed() {
            Ok(self)
        } else {
            Err(Error::Budget { rows: self.violations })
        }
    }
}

/// Per-row L-infinity and L2 deviations against `config.epsilon`. Batches
/// without clean originals trivially pass.
pub fn verify_budget(batch: &AdversarialBatch) -> Result<BudgetReport> {
    let budget = batch.config.epsilon;
    let Some(clean) = &batch.x_clean else {
        return Ok(BudgetReport {
            budget,
            linf: Vec::new(),
            l2: Vec::new(),
            max_linf: 0.0,
            violations: Vec::new(),
        });
    };
    if clean.shape() != batch.x_adv.shape() {
        return Err(Error::shape(
            "verify_budget",
            format!("{}x{}", clean.rows(), clean.cols()),
            format!("{}x{}", batch.x_adv.rows(), batch.x_adv.cols()),
        ));
    }
    let mut linf = Vec::with_capacity(clean.rows());
    let mut l2 = Vec::with_capacity(clean.rows());
    let mut violations = Vec::new();
    for (r, (c, a)) in clean.iter_rows().zip(batch.x_adv.iter_rows()).enumerate() {
        let mut mx = 0.0f64;
        let mut sq = 0.0;
        for (u, v) in c.iter().zip(a) {
            let d = (v - u).abs();
            mx = mx.max(d);
            sq += d * d;
        }
        if mx > budget + BUDGET_TOL {
            violations.push(r);
        }
        linf.push(mx);
        l2.push(sq.sqrt());
    }
    let max_linf = linf.iter().copied().fold(0.0, f64::max);
    Ok(BudgetReport {
        budget,
        linf,
        l2,
        max_linf,
        violations,
    })
}
