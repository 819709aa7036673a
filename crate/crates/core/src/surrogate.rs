//! Recurrent surrogate for transfer attacks: an LSTM over sliding windows
//! of rows with a sigmoid head, trained on both labels. Attacks run on the
//! flattened windows and are unrolled back to rows for evaluation.

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::attacks::{run_gradient_attack, AdversarialBatch, AttackConfig, AttackKind, GradientModel};
use crate::checkpoint::{self, GateRecord, NetworkRecord, FORMAT_VERSION};
use crate::data::{make_windows, Dataset, Label, NormStats, Window, WindowConfig};
use crate::nn::{bce_loss, Activation, AdamConfig, AdamState, LstmCell, Matrix, Network, Parameterized};
use crate::{seeded_rng, Error, Result};

const MODEL_KIND: &str = "surrogate-recurrent";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateConfig {
    pub hidden_dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Windows per optimizer step.
    pub batch_size: usize,
    /// Leading fraction of rows (in file order) used for training.
    pub train_frac: f64,
    pub window: WindowConfig,
    pub seed: u64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 64,
            epochs: 20,
            learning_rate: 1e-3,
            batch_size: 32,
            train_frac: 0.7,
            window: WindowConfig::default(),
            seed: 0,
        }
    }
}

impl SurrogateConfig {
    pub fn validate(&self) -> Result<()> {
        self.window.validate()?;
        if self.hidden_dim == 0 || self.batch_size == 0 {
            return Err(Error::Config("surrogate hidden_dim and batch_size must be >= 1".into()));
        }
        if !(self.train_frac > 0.0 && self.train_frac < 1.0) {
            return Err(Error::Config(format!(
                "surrogate train_frac must lie in (0, 1), got {}",
                self.train_frac
            )));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("surrogate learning_rate must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SurrogateModel {
    cell: LstmCell,
    head: Network,
    norm_stats: NormStats,
    config: SurrogateConfig,
}

impl SurrogateModel {
    pub fn new(n_features: usize, norm_stats: NormStats, config: SurrogateConfig) -> Result<Self> {
        config.validate()?;
        if norm_stats.dim() != n_features {
            return Err(Error::shape("SurrogateModel::new", n_features, norm_stats.dim()));
        }
        let mut rng = seeded_rng(config.seed);
        let cell = LstmCell::glorot(n_features, config.hidden_dim, &mut rng)?;
        let head = Network::glorot(config.hidden_dim, &[(1, Activation::Sigmoid)], &mut rng)?;
        Ok(Self {
            cell,
            head,
            norm_stats,
            config,
        })
    }

    pub fn config(&self) -> &SurrogateConfig {
        &self.config
    }

    pub fn norm_stats(&self) -> &NormStats {
        &self.norm_stats
    }

    pub fn n_features(&self) -> usize {
        self.cell.input_dim()
    }

    /// Length of a flattened window.
    pub fn window_dim(&self) -> usize {
        self.config.window.window_size * self.n_features()
    }

    fn split_steps(&self, x: &Matrix) -> Result<Vec<Matrix>> {
        if x.cols() != self.window_dim() {
            return Err(Error::shape("SurrogateModel input", self.window_dim(), x.cols()));
        }
        let f = self.n_features();
        (0..self.config.window.window_size)
            .map(|t| {
                let data = x
                    .iter_rows()
                    .flat_map(|r| r[t * f..(t + 1) * f].iter().copied())
                    .collect();
                Matrix::from_vec(x.rows(), f, data)
            })
            .collect()
    }

    fn forward(&mut self, x: &Matrix) -> Result<Matrix> {
        let steps = self.split_steps(x)?;
        let hidden = self.cell.forward(&steps)?;
        Ok(self.head.forward(hidden.last().expect("window_size >= 1"))?.clone())
    }

    /// Back-propagates a gradient w.r.t. the scores; returns the gradient
    /// w.r.t. the flattened windows.
    fn backward(&mut self, grad_scores: &Matrix) -> Result<Matrix> {
        let dh_last = self.head.backward(grad_scores)?;
        let t_len = self.config.window.window_size;
        let mut hidden_grads = vec![Matrix::zeros(dh_last.rows(), dh_last.cols()); t_len - 1];
        hidden_grads.push(dh_last);
        let step_grads = self.cell.backward(&hidden_grads)?;
        let (b, f) = (grad_scores.rows(), self.n_features());
        let mut out = Matrix::zeros(b, t_len * f);
        for (t, g) in step_grads.iter().enumerate() {
            for r in 0..b {
                out.row_mut(r)[t * f..(t + 1) * f].copy_from_slice(g.row(r));
            }
        }
        Ok(out)
    }

    /// Stable-probability per flattened, normalized window.
    pub fn scores(&self, x: &Matrix) -> Result<Vec<f64>> {
        let steps = self.split_steps(x)?;
        let hidden = self.cell.predict(&steps)?;
        Ok(self.head.predict(hidden.last().expect("window_size >= 1"))?.into_vec())
    }

    /// Labels per window at threshold 0.5.
    pub fn classify(&self, x: &Matrix) -> Result<Vec<Label>> {
        Ok(self
            .scores(x)?
            .into_iter()
            .map(|s| if s >= 0.5 { Label::Stable } else { Label::Unstable })
            .collect())
    }

    /// Normalized windows of `d` (raw units), flattened one per row.
    pub fn windows_of(&self, d: &Dataset) -> Result<(Vec<Window>, Matrix, Vec<Label>)> {
        let windows = make_windows(&self.norm_stats.apply(d)?, self.config.window)?;
        let x = flatten(&windows, self.window_dim())?;
        let labels = windows.iter().map(|w| w.label).collect();
        Ok((windows, x, labels))
    }

    pub fn to_json(&self) -> Result<String> {
        checkpoint::encode(&SurrogateCheckpoint {
            format_version: FORMAT_VERSION,
            model_kind: MODEL_KIND.into(),
            input_dim: self.cell.input_dim(),
            hidden_dim: self.cell.hidden_dim(),
            gates: self
                .cell
                .gate_params()
                .map(|(w, b)| GateRecord {
                    weights: w.data().to_vec(),
                    bias: b.to_vec(),
                })
                .collect(),
            head: NetworkRecord::from_network(&self.head),
            norm_stats: self.norm_stats.clone(),
            config: self.config.clone(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: SurrogateCheckpoint = checkpoint::decode(text, MODEL_KIND)?;
        let cols = ck.input_dim + ck.hidden_dim;
        let parts = ck
            .gates
            .into_iter()
            .map(|g| Ok((Matrix::from_vec(ck.hidden_dim, cols, g.weights)?, g.bias)))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::Checkpoint(format!("gate weights: {e}")))?;
        let cell = LstmCell::from_parts(ck.input_dim, ck.hidden_dim, parts)
            .map_err(|e| Error::Checkpoint(format!("gates: {e}")))?;
        let head = ck.head.to_network()?;
        if head.input_dim() != ck.hidden_dim
            || head.output_dim() != 1
            || ck.norm_stats.dim() != ck.input_dim
            || ck.config.hidden_dim != ck.hidden_dim
        {
            return Err(Error::Checkpoint(
                "surrogate shapes disagree with the stored config".into(),
            ));
        }
        Ok(Self {
            cell,
            head,
            norm_stats: ck.norm_stats,
            config: ck.config,
        })
    }

    pub fn save_checkpoint(&self, path: impl AsRef<Path>) -> Result<()> {
        checkpoint::write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&checkpoint::read_text(path)?)
    }
}

impl Parameterized for SurrogateModel {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut [f64], &[f64])) {
        self.cell.visit_params(f);
        self.head.visit_params(f);
    }
}

impl GradientModel for SurrogateModel {
    fn input_dim(&self) -> usize {
        self.window_dim()
    }

    fn loss_input_grad(&mut self, x: &Matrix, targets: &[f64]) -> Result<Matrix> {
        let scores = self.forward(x)?;
        let (_, grad) = bce_loss(&scores, targets)?;
        self.backward(&grad)
    }
}

#[derive(Serialize, Deserialize)]
struct SurrogateCheckpoint {
    format_version: u32,
    model_kind: String,
    input_dim: usize,
    hidden_dim: usize,
    gates: Vec<GateRecord>,
    head: NetworkRecord,
    norm_stats: NormStats,
    config: SurrogateConfig,
}

fn flatten(windows: &[Window], dim: usize) -> Result<Matrix> {
    let data = windows.iter().flat_map(|w| w.rows.data().iter().copied()).collect();
    Matrix::from_vec(windows.len(), dim, data)
}

fn window_accuracy(model: &SurrogateModel, x: &Matrix, labels: &[Label]) -> Result<f64> {
    if labels.is_empty() {
        return Ok(0.0);
    }
    let pred = model.classify(x)?;
    Ok(pred.iter().zip(labels).filter(|(p, l)| p == l).count() as f64 / labels.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateReport {
    pub train_rows: usize,
    pub test_rows: usize,
    pub train_windows: usize,
    pub test_windows: usize,
    pub epoch_losses: Vec<f64>,
    pub train_accuracy: f64,
    pub heldout_accuracy: f64,
    /// Fraction of held-out windows labelled stable.
    pub heldout_stable_prior: f64,
}

/// Trains on the leading `train_frac` of rows (file order, both labels)
/// and reports window accuracy on the rest.
pub fn train_surrogate(
    full: &Dataset,
    norm_stats: NormStats,
    cfg: &SurrogateConfig,
) -> Result<(SurrogateModel, SurrogateReport)> {
    cfg.validate()?;
    let n_train = (full.len() as f64 * cfg.train_frac).round() as usize;
    let train = full.subset(&(0..n_train).collect::<Vec<_>>());
    let test = full.subset(&(n_train..full.len()).collect::<Vec<_>>());
    if train.count(Label::Stable) == 0 || train.count(Label::Unstable) == 0 {
        return Err(Error::Argument("surrogate training rows contain a single class".into()));
    }

    let mut model = SurrogateModel::new(full.n_features(), norm_stats, cfg.clone())?;
    let (_, x_train, y_train) = model.windows_of(&train)?;
    if !y_train.contains(&Label::Stable) || !y_train.contains(&Label::Unstable) {
        return Err(Error::Argument(
            "surrogate training windows carry a single label".into(),
        ));
    }
    let (_, x_test, y_test) = if test.len() >= cfg.window.window_size {
        model.windows_of(&test)?
    } else {
        (Vec::new(), Matrix::zeros(0, model.window_dim()), Vec::new())
    };

    let mut rng = seeded_rng(cfg.seed.wrapping_add(1));
    let mut adam = AdamState::new(AdamConfig::standard(cfg.learning_rate));
    let mut order: Vec<usize> = (0..y_train.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (bi, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let xb = x_train.select_rows(chunk);
            let tb: Vec<f64> = chunk.iter().map(|&i| y_train[i].target()).collect();
            let scores = model.forward(&xb)?;
            let (loss, grad) = bce_loss(&scores, &tb)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite {
                    what: "surrogate loss",
                    epoch,
                    batch: bi,
                });
            }
            total += loss * chunk.len() as f64;
            model.backward(&grad)?;
            adam.step(&mut model)?;
        }
        let mean = total / y_train.len() as f64;
        log::debug!("surrogate epoch {epoch}: loss {mean:.5}");
        epoch_losses.push(mean);
    }

    let report = SurrogateReport {
        train_rows: train.len(),
        test_rows: test.len(),
        train_windows: y_train.len(),
        test_windows: y_test.len(),
        epoch_losses,
        train_accuracy: window_accuracy(&model, &x_train, &y_train)?,
        heldout_accuracy: window_accuracy(&model, &x_test, &y_test)?,
        heldout_stable_prior: if y_test.is_empty() {
            0.0
        } else {
            y_test.iter().filter(|&&l| l == Label::Stable).count() as f64 / y_test.len() as f64
        },
    };
    Ok((model, report))
}

/// Transfer-attack rows plus how well they fooled the surrogate itself.
#[derive(Debug, Clone)]
pub struct TransferOutcome {
    /// Unrolled rows in the surrogate's normalized space (statistics attached).
    pub batch: AdversarialBatch,
    /// Index into the attacked dataset of each unrolled row.
    pub row_indices: Vec<usize>,
    pub windows: usize,
    /// Fraction of adversarial windows the surrogate misclassifies.
    pub surrogate_fooling_rate: f64,
    pub surrogate_clean_accuracy: f64,
}

/// Attacks the surrogate on whole windows of `rows` (raw units) and unrolls
/// the perturbed windows to rows, keeping the first occurrence of each row.
pub fn transfer_attack(
    surrogate: &mut SurrogateModel,
    kind: AttackKind,
    cfg: &AttackConfig,
    rows: &Dataset,
    seed: u64,
) -> Result<TransferOutcome> {
    if !kind.is_gradient() {
        return Err(Error::Argument(format!(
            "transfer attack '{kind}' is not gradient-based"
        )));
    }
    let (windows, x, labels) = surrogate.windows_of(rows)?;
    let clean_acc = window_accuracy(surrogate, &x, &labels)?;
    let adv = run_gradient_attack(kind, surrogate, &x, &labels, cfg, seed)?;
    let adv_pred = surrogate.classify(&adv.x_adv)?;
    let fooled = adv_pred.iter().zip(&labels).filter(|(p, l)| p != l).count();

    let f = surrogate.n_features();
    let t_len = surrogate.config.window.window_size;
    let mut seen = vec![false; rows.len()];
    let mut row_indices = Vec::new();
    let (mut clean, mut perturbed) = (Vec::new(), Vec::new());
    for (w, win) in windows.iter().enumerate() {
        for t in 0..t_len {
            let r = win.start + t;
            if std::mem::replace(&mut seen[r], true) {
                continue;
            }
            row_indices.push(r);
            clean.extend_from_slice(&x.row(w)[t * f..(t + 1) * f]);
            perturbed.extend_from_slice(&adv.x_adv.row(w)[t * f..(t + 1) * f]);
        }
    }
    let n = row_indices.len();
    let batch = AdversarialBatch {
        attack: kind,
        x_clean: Some(Matrix::from_vec(n, f, clean)?),
        x_adv: Matrix::from_vec(n, f, perturbed)?,
        true_labels: row_indices.iter().map(|&r| rows.labels[r]).collect(),
        config: adv.config,
        seed,
        norm_stats: Some(surrogate.norm_stats.clone()),
    };
    Ok(TransferOutcome {
        batch,
        row_indices,
        windows: windows.len(),
        surrogate_fooling_rate: fooled as f64 / labels.len() as f64,
        surrogate_clean_accuracy: clean_acc,
    })
}
