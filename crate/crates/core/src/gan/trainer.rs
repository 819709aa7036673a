use std::time::Instant;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{repulsion_loss, DiscriminatorConfig, GanModel, GeneratorConfig, GeneratorObjective, TrainConfig};
use crate::attacks::signed_step;
use crate::data::{Dataset, Label, NormStats};
use crate::nn::{bce_loss, AdamConfig, AdamState, Matrix, Network};
use crate::{seeded_rng, Error, Result, SeededRng};

/// Optimizer phases of one batch cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    /// Discriminator on real stable rows.
    Real,
    /// Discriminator on generated rows.
    Fake,
    /// Discriminator on FGSM-perturbed stable rows.
    Adversarial,
    /// Generator step.
    Generator,
}

impl Phase {
    /// Discriminator target label for the phase; `None` for the generator.
    pub fn discriminator_label(self) -> Option<Label> {
        match self {
            Phase::Real => Some(Label::Stable),
            Phase::Fake | Phase::Adversarial => Some(Label::Unstable),
            Phase::Generator => None,
        }
    }
}

/// Adversarial part of the generator objective plus the repulsion term.
///
/// `d_out` holds discriminator probabilities on generated rows. Returns the
/// loss and its gradient w.r.t. `d_out`.
pub fn generator_loss(d_out: &Matrix, repulsion: f64, objective: GeneratorObjective) -> Result<(f64, Matrix)> {
    let ones = vec![1.0; d_out.rows()];
    let (nll, grad) = bce_loss(d_out, &ones)?;
    Ok(match objective {
        GeneratorObjective::NonSaturating => (nll + repulsion, grad),
        GeneratorObjective::LogD => (-nll + repulsion, grad.map(|g| -g)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub d_loss_real: f64,
    pub d_loss_fake: f64,
    /// `None` when the adversarial layer is off.
    pub d_loss_adv: Option<f64>,
    /// Total generator objective, repulsion included.
    pub g_loss: f64,
    pub repulsion_loss: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub batches_per_epoch: usize,
    /// Optimizer steps taken per phase, in [`Phase`] order.
    pub phase_steps: [u64; 4],
}

impl TrainReport {
    pub fn optimizer_steps(&self) -> u64 {
        self.phase_steps.iter().sum()
    }

    /// Loss curves as CSV; wall time is left out so seeded runs produce
    /// identical bytes.
    pub fn loss_csv(&self) -> String {
        let mut out = String::from("epoch,d_loss_real,d_loss_fake,d_loss_adv,g_loss,repulsion_loss\n");
        for e in &self.epochs {
            let adv = e.d_loss_adv.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                e.epoch, e.d_loss_real, e.d_loss_fake, adv, e.g_loss, e.repulsion_loss
            ));
        }
        out
    }

    pub fn timing_csv(&self) -> String {
        let mut out = String::from("epoch,wall_time_s\n");
        for e in &self.epochs {
            out.push_str(&format!("{},{}\n", e.epoch, e.wall_time_s));
        }
        out
    }
}

/// Runs the four-phase training cycle one epoch at a time.
///
/// Per batch of stable rows: (1) discriminator step towards "stable" on the
/// real batch; (2) discriminator step towards "unstable" on generated rows;
/// (3) only with the adversarial layer, discriminator step towards "unstable"
/// on the batch perturbed by FGSM against the current discriminator;
/// (4) generator step on the adversarial objective plus repulsion from the
/// shuffled real batch.
pub struct Trainer {
    cfg: TrainConfig,
    gen_cfg: GeneratorConfig,
    disc_cfg: DiscriminatorConfig,
    generator: Network,
    discriminator: Network,
    opt_g: AdamState,
    opt_d: AdamState,
    norm_stats: NormStats,
    rng: SeededRng,
    epoch: usize,
    report: TrainReport,
}

impl Trainer {
    pub fn new(
        gen_cfg: GeneratorConfig,
        disc_cfg: DiscriminatorConfig,
        cfg: TrainConfig,
        norm_stats: NormStats,
    ) -> Result<Self> {
        cfg.validate()?;
        if gen_cfg.output_dim != disc_cfg.input_dim {
            return Err(Error::Config(format!(
                "generator emits {} features but the discriminator reads {}",
                gen_cfg.output_dim, disc_cfg.input_dim
            )));
        }
        if norm_stats.dim() != disc_cfg.input_dim {
            return Err(Error::Config(format!(
                "normalization covers {} features, model expects {}",
                norm_stats.dim(),
                disc_cfg.input_dim
            )));
        }
        let mut rng = seeded_rng(cfg.seed);
        let generator = Network::glorot(gen_cfg.latent_dim, &gen_cfg.layer_spec(), &mut rng)?;
        let discriminator = Network::glorot(disc_cfg.input_dim, &disc_cfg.layer_spec(), &mut rng)?;
        let adam = AdamConfig::gan(cfg.learning_rate);
        Ok(Self {
            opt_g: AdamState::new(adam),
            opt_d: AdamState::new(adam),
            cfg,
            gen_cfg,
            disc_cfg,
            generator,
            discriminator,
            norm_stats,
            rng,
            epoch: 0,
            report: TrainReport::default(),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    pub fn report(&self) -> &TrainReport {
        &self.report
    }

    /// Snapshot of the current networks as a model.
    pub fn model(&self) -> GanModel {
        GanModel::from_parts(
            self.gen_cfg.clone(),
            self.disc_cfg.clone(),
            self.generator.clone(),
            self.discriminator.clone(),
            self.norm_stats.clone(),
            self.cfg.clone(),
        )
    }

    pub fn into_parts(self) -> (GanModel, TrainReport) {
        let model = GanModel::from_parts(
            self.gen_cfg,
            self.disc_cfg,
            self.generator,
            self.discriminator,
            self.norm_stats,
            self.cfg,
        );
        (model, self.report)
    }

    fn latent(&mut self, rows: usize) -> Matrix {
        let dim = self.gen_cfg.latent_dim;
        let data = (0..rows * dim).map(|_| StandardNormal.sample(&mut self.rng)).collect();
        Matrix::from_vec(rows, dim, data).expect("sized")
    }

    fn discriminator_step(&mut self, phase: Phase, x: &Matrix) -> Result<f64> {
        let label = phase.discriminator_label().expect("discriminator phases carry a label");
        // real rows are the only ones ever labelled stable
        assert_eq!(label == Label::Stable, phase == Phase::Real);
        let targets = vec![label.target(); x.rows()];
        let out = self.discriminator.forward(x)?;
        let (loss, grad) = bce_loss(out, &targets)?;
        self.discriminator.backward(&grad)?;
        self.opt_d.step(&mut self.discriminator)?;
        self.report.phase_steps[phase as usize] += 1;
        Ok(loss)
    }

    /// FGSM against the current discriminator with the stable label.
    fn adversarial_batch(&mut self, x: &Matrix) -> Result<Matrix> {
        let targets = vec![Label::Stable.target(); x.rows()];
        let out = self.discriminator.forward(x)?;
        let (_, grad) = bce_loss(out, &targets)?;
        let gx = self.discriminator.input_gradient(&grad)?;
        signed_step(x, &gx, self.cfg.fgsm_epsilon)
    }

    fn generator_step(&mut self, real: &Matrix) -> Result<(f64, f64)> {
        let b = real.rows();
        let z = self.latent(b);
        let fake = self.generator.forward(&z)?.clone();
        let d_out = self.discriminator.forward(&fake)?;

        let mut order: Vec<usize> = (0..b).collect();
        order.shuffle(&mut self.rng);
        let paired = real.select_rows(&order);
        let (rep, rep_grad) = repulsion_loss(&fake, &paired, self.cfg.margin)?;
        let (loss, d_grad) = generator_loss(d_out, rep, self.cfg.generator_objective)?;

        let through_d = self.discriminator.input_gradient(&d_grad)?;
        let total = through_d.zip_map(&rep_grad, |a, b| a + b)?;
        self.generator.backward(&total)?;
        self.opt_g.step(&mut self.generator)?;
        self.report.phase_steps[Phase::Generator as usize] += 1;
        Ok((loss, rep))
    }

    /// One pass over `train` (normalized stable rows) in shuffled batches.
    pub fn run_epoch(&mut self, train: &Matrix) -> Result<EpochRecord> {
        if train.cols() != self.disc_cfg.input_dim {
            return Err(Error::shape(
                "Trainer::run_epoch",
                self.disc_cfg.input_dim,
                train.cols(),
            ));
        }
        if train.rows() == 0 {
            return Err(Error::Argument("no training rows".into()));
        }
        let start = Instant::now();
        let epoch = self.epoch + 1;
        let mut order: Vec<usize> = (0..train.rows()).collect();
        order.shuffle(&mut self.rng);

        let check = |v: f64, what: &'static str, batch: usize| {
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite { what, epoch, batch })
            }
        };
        let mut sums = [0.0f64; 5];
        let mut batches = 0usize;
        for (batch, idx) in order.chunks(self.cfg.batch_size).enumerate() {
            let real = train.select_rows(idx);

            let l_real = self.discriminator_step(Phase::Real, &real)?;
            sums[0] += check(l_real, "discriminator real loss", batch)?;

            let z = self.latent(real.rows());
            let fake = self.generator.predict(&z)?;
            let l_fake = self.discriminator_step(Phase::Fake, &fake)?;
            sums[1] += check(l_fake, "discriminator fake loss", batch)?;

            if self.cfg.adversarial_layer {
                let adv = self.adversarial_batch(&real)?;
                let l_adv = self.discriminator_step(Phase::Adversarial, &adv)?;
                sums[2] += check(l_adv, "discriminator adversarial loss", batch)?;
            }

            let (l_g, l_rep) = self.generator_step(&real)?;
            sums[3] += check(l_g, "generator loss", batch)?;
            sums[4] += check(l_rep, "repulsion loss", batch)?;
            batches += 1;
        }
        let n = batches as f64;
        let record = EpochRecord {
            epoch,
            d_loss_real: sums[0] / n,
            d_loss_fake: sums[1] / n,
            d_loss_adv: self.cfg.adversarial_layer.then(|| sums[2] / n),
            g_loss: sums[3] / n,
            repulsion_loss: sums[4] / n,
            wall_time_s: start.elapsed().as_secs_f64(),
        };
        self.epoch = epoch;
        self.report.batches_per_epoch = batches;
        self.report.epochs.push(record.clone());
        Ok(record)
    }
}

/// Trains a model with the default architectures on normalized stable rows.
/// `norm_stats` are the statistics the rows were normalized with; the model
/// keeps them for raw-unit inference.
pub fn train(stable_train: &Dataset, norm_stats: &NormStats, cfg: &TrainConfig) -> Result<(GanModel, TrainReport)> {
    let gen_cfg = GeneratorConfig {
        output_dim: stable_train.n_features(),
        ..GeneratorConfig::default()
    };
    let disc_cfg = DiscriminatorConfig {
        input_dim: stable_train.n_features(),
        ..DiscriminatorConfig::default()
    };
    train_with(stable_train, norm_stats, gen_cfg, disc_cfg, cfg, |_, _| Ok(()))
}

/// Like [`train`] with explicit architectures and a per-epoch observer.
pub fn train_with(
    stable_train: &Dataset,
    norm_stats: &NormStats,
    gen_cfg: GeneratorConfig,
    disc_cfg: DiscriminatorConfig,
    cfg: &TrainConfig,
    mut observer: impl FnMut(&EpochRecord, &Trainer) -> Result<()>,
) -> Result<(GanModel, TrainReport)> {
    if stable_train.labels.iter().any(|&l| l != Label::Stable) {
        return Err(Error::Argument("training rows must all be labelled stable".into()));
    }
    let mut trainer = Trainer::new(gen_cfg, disc_cfg, cfg.clone(), norm_stats.clone())?;
    for _ in 0..cfg.epochs {
        let record = trainer.run_epoch(&stable_train.features)?;
        log::info!(
            "epoch {:>4}: d_real {:.4} d_fake {:.4} d_adv {} g {:.4} rep {:.4} ({:.2}s)",
            record.epoch,
            record.d_loss_real,
            record.d_loss_fake,
            record.d_loss_adv.map_or("-".to_string(), |v| format!("{v:.4}")),
            record.g_loss,
            record.repulsion_loss,
            record.wall_time_s
        );
        observer(&record, &trainer)?;
    }
    Ok(trainer.into_parts())
}
