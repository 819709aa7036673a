//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria 1-6 run the full pipeline with the default hyperparameters on
//! the real grid-stability CSV named by `GRID_STABILITY_CSV`, over seeds 0, 1
//! and 2. Without that variable they report FAIL. Criteria 7-15 use
//! synthetic data and run everywhere.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use gan_stability::attacks::{
    bim, fgsm, run_gradient_attack, verify_budget, AttackConfig, AttackKind, GradientModel, BUDGET_TOL,
};
use gan_stability::data::synthetic::synthetic_grid;
use gan_stability::data::{
    augment_sixfold, load_csv, split_stable_only, zscore_fit, Dataset, Label, NormStats, SplitBundle,
    CONSUMER_PERMUTATIONS,
};
use gan_stability::eval::{
    bench_timing, confusion, metrics, roc, run_scenarios, table2_csv, table3_csv, Evaluation, Scenario, ScenarioInputs,
    ScenarioSettings, TimingConfig, BASELINE_MODEL, BOTH_COLUMN, MEAN_COLUMN, PRIMARY_MODEL, STABLE_COLUMN,
    UNSTABLE_COLUMN,
};
use gan_stability::gan::{repulsion_loss, train_with, DiscriminatorConfig, GeneratorConfig, TrainConfig, Trainer};
use gan_stability::nn::{bce_loss, Activation, LstmCell, Matrix, Network, Parameterized};
use gan_stability::seeded_rng;
use gan_stability::surrogate::{train_surrogate, SurrogateConfig, SurrogateModel};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

const DATASET_ENV: &str = "GRID_STABILITY_CSV";
const SEEDS: [u64; 3] = [0, 1, 2];
const ORIGINAL_ROWS: usize = 10_000;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn fmt_all(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join("/")
}

// ---------------------------------------------------------------------------
// full pipeline on the real dataset

struct SeedRun {
    eval: Evaluation,
}

fn real_runs() -> &'static Result<Vec<SeedRun>, String> {
    static RUNS: std::sync::OnceLock<Result<Vec<SeedRun>, String>> = std::sync::OnceLock::new();
    RUNS.get_or_init(|| {
        let path =
            std::env::var(DATASET_ENV).map_err(|_| format!("{DATASET_ENV} is not set; real dataset unavailable"))?;
        let (raw, _) = load_csv(&path).map_err(|e| format!("{path}: {e}"))?;
        let full = if raw.len() == ORIGINAL_ROWS {
            augment_sixfold(&raw).map_err(|e| e.to_string())?
        } else {
            raw
        };
        SEEDS
            .iter()
            .map(|&seed| run_seed(&full, seed).map_err(|e| format!("seed {seed}: {e}")))
            .collect()
    })
}

fn run_seed(full: &Dataset, seed: u64) -> gan_stability::Result<SeedRun> {
    let split = split_stable_only(full, 0.9, seed)?;
    let stats = zscore_fit(&split.train_stable)?;
    let x = stats.apply(&split.train_stable)?;
    let train = |adversarial_layer: bool| {
        let cfg = TrainConfig {
            adversarial_layer,
            seed,
            ..TrainConfig::default()
        };
        train_with(
            &x,
            &stats,
            GeneratorConfig::default(),
            DiscriminatorConfig::default(),
            &cfg,
            |_, _| Ok(()),
        )
        .map(|(m, _)| m)
    };
    let model = train(true)?;
    let baseline = train(false)?;
    let scfg = SurrogateConfig {
        seed,
        ..SurrogateConfig::default()
    };
    let (surrogate, _) = train_surrogate(full, stats.clone(), &scfg)?;
    let settings = ScenarioSettings {
        seed,
        gan_grid: gan_stability::attacks::GanGridConfig {
            seed,
            ..Default::default()
        },
        ..ScenarioSettings::default()
    };
    let inputs = ScenarioInputs {
        model: &model,
        baseline: Some(&baseline),
        surrogate: Some(&surrogate),
        split: &split,
    };
    Ok(SeedRun {
        eval: run_scenarios(&inputs, &settings)?,
    })
}

/// Per-seed values of one cell, or why they are unavailable.
fn per_seed(scenario: Scenario, model: &str, column: &str) -> Result<Vec<f64>, String> {
    let runs = real_runs().as_ref().map_err(Clone::clone)?;
    runs.iter()
        .map(|r| {
            r.eval
                .report(scenario, model)
                .and_then(|rep| rep.value(column))
                .ok_or_else(|| format!("{} / {model} / {column} missing", scenario.name()))
        })
        .collect()
}

fn per_seed_f1(model: &str) -> Result<Vec<f64>, String> {
    let runs = real_runs().as_ref().map_err(Clone::clone)?;
    runs.iter()
        .map(|r| {
            r.eval
                .report(Scenario::Baseline, model)
                .and_then(|rep| rep.cell(BOTH_COLUMN))
                .and_then(|c| c.metrics)
                .map(|m| m.f1)
                .ok_or_else(|| "F1 missing".to_string())
        })
        .collect()
}

fn suite_means(scenario: Scenario, model: &str) -> Result<Vec<f64>, String> {
    let runs = real_runs().as_ref().map_err(Clone::clone)?;
    runs.iter()
        .map(|r| {
            let rep = r.eval.report(scenario, model).ok_or("report missing")?;
            let v: Vec<f64> = AttackKind::GRADIENT
                .iter()
                .filter_map(|k| rep.value(k.title()))
                .collect();
            if v.is_empty() {
                Err("no gradient attack cells".to_string())
            } else {
                Ok(mean(&v))
            }
        })
        .collect()
}

fn c1_baseline_accuracy() -> Verdict {
    match per_seed(Scenario::Baseline, BASELINE_MODEL, MEAN_COLUMN) {
        Ok(v) => {
            let m = mean(&v);
            verdict(
                (0.87..=0.96).contains(&m),
                format!(
                    "no-AT mean per-class accuracy {m:.4} (seeds {}), accept [0.87, 0.96]",
                    fmt_all(&v)
                ),
            )
        }
        Err(e) => verdict(false, e),
    }
}

fn c2_at_classification() -> Verdict {
    let get = || -> Result<(f64, f64, f64, f64), String> {
        Ok((
            mean(&per_seed(Scenario::Baseline, PRIMARY_MODEL, BOTH_COLUMN)?),
            mean(&per_seed_f1(PRIMARY_MODEL)?),
            mean(&per_seed(Scenario::Baseline, PRIMARY_MODEL, STABLE_COLUMN)?),
            mean(&per_seed(Scenario::Baseline, PRIMARY_MODEL, UNSTABLE_COLUMN)?),
        ))
    };
    match get() {
        Ok((acc, f1, s, u)) => verdict(
            acc >= 0.94 && f1 >= 0.96 && s >= 0.85 && u >= 0.93,
            format!(
                "AT accuracy {acc:.4} (>= 0.94), F1 {f1:.4} (>= 0.96), stable {s:.4} (>= 0.85), unstable {u:.4} (>= 0.93)"
            ),
        ),
        Err(e) => verdict(false, e),
    }
}

fn c3_white_box() -> Verdict {
    let get = || -> Result<(Vec<(AttackKind, f64)>, f64), String> {
        let mut cells = Vec::new();
        for k in AttackKind::GRADIENT {
            cells.push((k, mean(&per_seed(Scenario::WhiteBox, PRIMARY_MODEL, k.title())?)));
        }
        let suite = mean(&suite_means(Scenario::WhiteBox, PRIMARY_MODEL)?);
        Ok((cells, suite))
    };
    match get() {
        Ok((cells, suite)) => {
            let each = cells.iter().all(|(_, v)| *v >= 0.90);
            let text: Vec<String> = cells.iter().map(|(k, v)| format!("{} {v:.4}", k.title())).collect();
            verdict(
                each && suite >= 0.95,
                format!("{} (each >= 0.90), suite mean {suite:.4} (>= 0.95)", text.join(", ")),
            )
        }
        Err(e) => verdict(false, e),
    }
}

fn c4_grey_box_transfer() -> Verdict {
    let get = || -> Result<Vec<(AttackKind, f64)>, String> {
        AttackKind::GRADIENT
            .iter()
            .map(|&k| Ok((k, mean(&per_seed(Scenario::GreyBox1, PRIMARY_MODEL, k.title())?))))
            .collect()
    };
    match get() {
        Ok(cells) => {
            let text: Vec<String> = cells.iter().map(|(k, v)| format!("{} {v:.4}", k.title())).collect();
            verdict(
                cells.iter().all(|(_, v)| *v >= 0.90),
                format!("{} (each >= 0.90)", text.join(", ")),
            )
        }
        Err(e) => verdict(false, e),
    }
}

fn c5_gan_grid() -> Verdict {
    let col = AttackKind::GanGrid.title();
    let get = || -> Result<(f64, f64), String> {
        Ok((
            mean(&per_seed(Scenario::GreyBox2, PRIMARY_MODEL, col)?),
            mean(&per_seed(Scenario::GreyBox2, BASELINE_MODEL, col)?),
        ))
    };
    match get() {
        Ok((at, base)) => verdict(
            at >= 0.90 && at - base >= 0.0,
            format!(
                "AT detection {at:.4} (>= 0.90), baseline {base:.4}, gap {:.4} (>= 0)",
                at - base
            ),
        ),
        Err(e) => verdict(false, e),
    }
}

fn c6_ordering() -> Verdict {
    let get = || -> Result<(f64, f64), String> {
        Ok((
            mean(&suite_means(Scenario::WhiteBox, PRIMARY_MODEL)?),
            mean(&suite_means(Scenario::WhiteBox, BASELINE_MODEL)?),
        ))
    };
    match get() {
        Ok((at, base)) => verdict(at > base, format!("white-box suite mean AT {at:.4} > no-AT {base:.4}")),
        Err(e) => verdict(false, e),
    }
}

// ---------------------------------------------------------------------------
// synthetic criteria

fn synthetic_stable(n: usize, seed: u64) -> (Dataset, NormStats) {
    let d = synthetic_grid(n * 4, seed).filter(Label::Stable);
    let d = d.subset(&(0..n.min(d.len())).collect::<Vec<_>>());
    let stats = zscore_fit(&d).unwrap();
    (stats.apply(&d).unwrap(), stats)
}

fn c7_timing() -> Verdict {
    let (x, stats) = synthetic_stable(400, 7);
    let cfg = TrainConfig {
        seed: 7,
        ..TrainConfig::default()
    };
    let t = bench_timing(
        &x.features,
        &stats,
        &GeneratorConfig::default(),
        &DiscriminatorConfig::default(),
        &cfg,
        &TimingConfig {
            repetitions: 3,
            warmup: 1,
        },
    )
    .unwrap();
    let (w, wo, inf) = (
        t.epoch_with_adversarial_layer.mean,
        t.epoch_without_adversarial_layer.mean,
        t.inference_batch_ms.mean,
    );
    verdict(
        w > wo && inf < 50.0,
        format!(
            "epoch with AT {w:.3}s > without {wo:.3}s on {} rows; one-batch inference {inf:.3} ms (< 50 ms)",
            t.rows
        ),
    )
}

fn nudge<M: Parameterized>(m: &mut M, index: usize, delta: f64) {
    let mut offset = 0;
    m.visit_params(&mut |p, _| {
        if (offset..offset + p.len()).contains(&index) {
            p[index - offset] += delta;
        }
        offset += p.len();
    });
}

fn grads_of<M: Parameterized>(m: &mut M) -> Vec<f64> {
    let mut out = Vec::new();
    m.visit_params(&mut |_, g| out.extend_from_slice(g));
    out
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = seeded_rng(seed);
    Matrix::from_vec(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.random_range(-1.5..1.5)).collect(),
    )
    .unwrap()
}

/// Largest relative error of parameter gradients (at `indices`) against
/// central differences of `loss`.
fn param_check<M: Parameterized>(m: &mut M, analytic: &[f64], indices: &[usize], loss: impl Fn(&M) -> f64) -> f64 {
    let h = 1e-6;
    let mut worst = 0.0f64;
    for &i in indices {
        nudge(m, i, h);
        let up = loss(m);
        nudge(m, i, -2.0 * h);
        let dn = loss(m);
        nudge(m, i, h);
        worst = worst.max(rel_err((up - dn) / (2.0 * h), analytic[i]));
    }
    worst
}

fn input_check(x: &Matrix, analytic: &Matrix, loss: impl Fn(&Matrix) -> f64) -> f64 {
    let h = 1e-6;
    let mut worst = 0.0f64;
    for i in 0..x.data().len() {
        let mut up = x.clone();
        up.data_mut()[i] += h;
        let mut dn = x.clone();
        dn.data_mut()[i] -= h;
        worst = worst.max(rel_err((loss(&up) - loss(&dn)) / (2.0 * h), analytic.data()[i]));
    }
    worst
}

fn network_check(mut net: Network, x: &Matrix, targets: &[f64], sample: Option<usize>) -> (f64, f64) {
    let bce = |n: &Network, x: &Matrix| bce_loss(&n.predict(x).unwrap(), targets).unwrap().0;
    let out = net.forward(x).unwrap().clone();
    let (_, g) = bce_loss(&out, targets).unwrap();
    let gin = net.backward(&g).unwrap();
    let analytic = grads_of(&mut net);
    let indices: Vec<usize> = match sample {
        Some(k) => {
            let mut rng = seeded_rng(analytic.len() as u64);
            (0..k).map(|_| rng.random_range(0..analytic.len())).collect()
        }
        None => (0..analytic.len()).collect(),
    };
    let p = param_check(&mut net, &analytic, &indices, |n| bce(n, x));
    let i = input_check(x, &gin, |xx| bce(&net, xx));
    (p, i)
}

fn c8_gradients() -> Verdict {
    let mut rows = Vec::new();
    let mut worst = 0.0f64;

    // small stack with every activation, all parameters
    let spec = [
        (7, Activation::leaky_relu(0.2)),
        (5, Activation::Tanh),
        (4, Activation::Linear),
        (1, Activation::Sigmoid),
    ];
    let net = Network::glorot(6, &spec, &mut seeded_rng(1)).unwrap();
    let (p, i) = network_check(net, &random_matrix(5, 6, 2), &[1.0, 0.0, 1.0, 1.0, 0.0], None);
    rows.push(format!("dense params {p:.1e} inputs {i:.1e}"));
    worst = worst.max(p).max(i);

    // full-size discriminator, sampled parameters
    let d = DiscriminatorConfig::default();
    let net = Network::glorot(12, &d.layer_spec(), &mut seeded_rng(3)).unwrap();
    let (p, i) = network_check(net, &random_matrix(3, 12, 4), &[1.0, 0.0, 1.0], Some(400));
    rows.push(format!("discriminator params {p:.1e} inputs {i:.1e}"));
    worst = worst.max(p).max(i);

    // LSTM cell over a short sequence
    let mut cell = LstmCell::glorot(3, 5, &mut seeded_rng(5)).unwrap();
    let seq: Vec<Matrix> = (0..4).map(|t| random_matrix(2, 3, 10 + t)).collect();
    let probes: Vec<Matrix> = (0..4).map(|t| random_matrix(2, 5, 20 + t)).collect();
    let probe_loss = |c: &LstmCell, s: &[Matrix]| -> f64 {
        c.predict(s)
            .unwrap()
            .iter()
            .zip(&probes)
            .map(|(h, p)| h.data().iter().zip(p.data()).map(|(a, b)| a * b).sum::<f64>())
            .sum()
    };
    cell.forward(&seq).unwrap();
    let gin = cell.backward(&probes).unwrap();
    let analytic = grads_of(&mut cell);
    let idx: Vec<usize> = (0..analytic.len()).collect();
    let p = param_check(&mut cell, &analytic, &idx, |c| probe_loss(c, &seq));
    let mut i = 0.0f64;
    for t in 0..seq.len() {
        i = i.max(input_check(&seq[t], &gin[t], |xt| {
            let mut s = seq.clone();
            s[t] = xt.clone();
            probe_loss(&cell, &s)
        }));
    }
    rows.push(format!("lstm params {p:.1e} inputs {i:.1e}"));
    worst = worst.max(p).max(i);

    // surrogate input gradient through the recurrent stack
    let cfg = SurrogateConfig {
        hidden_dim: 6,
        window: gan_stability::data::WindowConfig {
            window_size: 3,
            step: 1,
        },
        ..SurrogateConfig::default()
    };
    let mut s = SurrogateModel::new(12, NormStats::identity(12), cfg).unwrap();
    let x = random_matrix(2, 36, 30);
    let targets = [1.0, 0.0];
    let g = s.loss_input_grad(&x, &targets).unwrap();
    let i = input_check(&x, &g, |xx| {
        let scores = s.scores(xx).unwrap();
        bce_loss(&Matrix::from_vec(2, 1, scores).unwrap(), &targets).unwrap().0
    });
    rows.push(format!("surrogate inputs {i:.1e}"));
    worst = worst.max(i);

    verdict(
        worst < 1e-4,
        format!("max rel. error {worst:.2e} (< 1e-4): {}", rows.join("; ")),
    )
}

fn c9_repulsion() -> Verdict {
    let m = 4.0;
    let s = Matrix::from_rows(&[[0.5, -1.0, 2.0]]).unwrap();
    let dir = [2.0f64 / 3.0, 1.0 / 3.0, -2.0 / 3.0];
    let at = |d: f64| Matrix::from_rows(&[[0.5 + d * dir[0], -1.0 + d * dir[1], 2.0 + d * dir[2]]]).unwrap();
    let mut worst_value = 0.0f64;
    for k in 0..=80 {
        let d = k as f64 * 0.1;
        let expected = if d >= m { 0.0 } else { m - d };
        worst_value = worst_value.max((repulsion_loss(&at(d), &s, m).unwrap().0 - expected).abs());
    }
    // batch mean of the hinge
    let x = Matrix::from_rows(&[[0.0, 0.0], [3.0, 4.0], [0.0, 1.0]]).unwrap();
    let sr = Matrix::from_rows(&[[0.0, 0.0], [0.0, 0.0], [0.0, 0.0]]).unwrap();
    worst_value = worst_value.max((repulsion_loss(&x, &sr, m).unwrap().0 - (4.0 + 0.0 + 3.0) / 3.0).abs());

    let mut worst_grad = 0.0f64;
    for seed in 0..50u64 {
        let mut rng = seeded_rng(seed);
        let x = random_matrix(4, 5, seed * 2 + 1);
        let sref = Matrix::from_vec(4, 5, x.data().iter().map(|v| v + rng.random_range(-2.0..2.0)).collect()).unwrap();
        let dists: Vec<f64> = x
            .iter_rows()
            .zip(sref.iter_rows())
            .map(|(a, b)| a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt())
            .collect();
        if dists.iter().any(|d| (d - m).abs() < 1e-3 || *d < 1e-3) {
            continue;
        }
        let (_, g) = repulsion_loss(&x, &sref, m).unwrap();
        worst_grad = worst_grad.max(input_check(&x, &g, |xx| repulsion_loss(xx, &sref, m).unwrap().0));
    }
    verdict(
        worst_value < 1e-12 && worst_grad < 1e-4,
        format!("max value error {worst_value:.1e} (< 1e-12), max gradient rel. error {worst_grad:.1e}"),
    )
}

fn c10_budgets() -> Verdict {
    let d = synthetic_grid(1200, 10);
    let stats = zscore_fit(&d).unwrap();
    let x = stats.apply_matrix(&d.features).unwrap();
    let trainer = Trainer::new(
        GeneratorConfig::default(),
        DiscriminatorConfig::default(),
        TrainConfig::default(),
        stats,
    )
    .unwrap();
    let mut disc = trainer.model().discriminator().clone();
    let mut worst = 0.0f64;
    let mut violations = 0;
    let mut batches = 0;
    for eps in [0.01, 0.05, 0.2] {
        let cfg = AttackConfig::with_epsilon(eps);
        for kind in AttackKind::GRADIENT {
            let b = run_gradient_attack(kind, &mut disc, &x, &d.labels, &cfg, 3).unwrap();
            let r = verify_budget(&b).unwrap();
            worst = worst.max(r.max_linf - eps);
            violations += r.violations.len();
            batches += 1;
        }
    }
    let eps = 0.05;
    let a = fgsm(&mut disc, &x, &d.labels, eps).unwrap();
    let one_step = AttackConfig {
        epsilon: eps,
        alpha: eps,
        iterations: 1,
        noise_sigma: 0.0,
    };
    let b = bim(&mut disc, &x, &d.labels, &one_step).unwrap();
    let identical = a.x_adv.data() == b.x_adv.data();
    verdict(
        violations == 0 && worst <= BUDGET_TOL && identical,
        format!(
            "{batches} batches x {} rows, {violations} violations, max excess {worst:.1e} (<= 1e-9); BIM(1, eps) == FGSM bit-exact: {identical}",
            x.rows()
        ),
    )
}

fn c11_augmentation() -> Verdict {
    let d = synthetic_grid(500, 11);
    let a = augment_sixfold(&d).unwrap();
    let count_ok = a.len() == 6 * d.len();
    let mut identity_ok = true;
    let mut multiset_ok = true;
    let mut roundtrip_ok = true;
    for r in 0..d.len() {
        let orig = d.features.row(r);
        identity_ok &= a.features.row(6 * r) == orig;
        // each block's consumer values, sorted, must match the original's
        let mut seen = Vec::new();
        for k in 0..6 {
            let row = a.features.row(6 * r + k);
            identity_ok &= a.labels[6 * r + k] == d.labels[r];
            for block in 0..3 {
                let base = block * 4;
                multiset_ok &= row[base] == orig[base];
                let mut got = row[base + 1..base + 4].to_vec();
                let mut want = orig[base + 1..base + 4].to_vec();
                got.sort_by(f64::total_cmp);
                want.sort_by(f64::total_cmp);
                multiset_ok &= got == want;
            }
            // undo the permutation and recover the original
            let perm = CONSUMER_PERMUTATIONS[k];
            let mut back = row.to_vec();
            for block in 0..3 {
                let base = block * 4;
                for (slot, &src) in perm.iter().enumerate() {
                    back[base + 1 + src] = row[base + 1 + slot];
                }
            }
            roundtrip_ok &= back == orig;
            seen.push(row.to_vec());
        }
        // the six orderings of consumer triples are pairwise distinct when node values differ
        seen.sort_by(|a, b| a.partial_cmp(b).unwrap());
        seen.dedup();
        multiset_ok &= seen.len() == 6;
    }
    verdict(
        count_ok && identity_ok && multiset_ok && roundtrip_ok,
        format!(
            "{} -> {} rows; identity first {identity_ok}; permutation multisets {multiset_ok}; inverse round trip {roundtrip_ok}",
            d.len(),
            a.len()
        ),
    )
}

fn pairwise_auc(scores: &[f64], truth: &[Label]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &ti) in truth.iter().enumerate() {
        if ti != Label::Unstable {
            continue;
        }
        for (j, &tj) in truth.iter().enumerate() {
            if tj == Label::Stable {
                pairs += 1.0;
                wins += if scores[i] > scores[j] {
                    1.0
                } else if scores[i] == scores[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    wins / pairs
}

fn c12_metrics() -> Verdict {
    let mut rng = seeded_rng(12);
    let mut worst_auc = 0.0f64;
    let mut worst_acc = 0.0f64;
    let mut count_mismatch = 0;
    let trials = 200;
    for t in 0..trials {
        let n = rng.random_range(2..=1000);
        let truth: Vec<Label> = (0..n)
            .map(|_| {
                if rng.random_bool(0.4) {
                    Label::Unstable
                } else {
                    Label::Stable
                }
            })
            .collect();
        let pred: Vec<Label> = (0..n)
            .map(|_| {
                if rng.random_bool(0.5) {
                    Label::Unstable
                } else {
                    Label::Stable
                }
            })
            .collect();
        let cm = confusion(&truth, &pred).unwrap();
        let count = |a: Label, b: Label| truth.iter().zip(&pred).filter(|(x, y)| **x == a && **y == b).count() as u64;
        if (cm.tp, cm.tn, cm.fp, cm.fn_)
            != (
                count(Label::Unstable, Label::Unstable),
                count(Label::Stable, Label::Stable),
                count(Label::Stable, Label::Unstable),
                count(Label::Unstable, Label::Stable),
            )
        {
            count_mismatch += 1;
        }
        let correct = truth.iter().zip(&pred).filter(|(a, b)| a == b).count() as f64;
        worst_acc = worst_acc.max((metrics(&cm).unwrap().accuracy - correct / n as f64).abs());
        if !(truth.contains(&Label::Stable) && truth.contains(&Label::Unstable)) {
            continue;
        }
        // alternate coarse (tied) and continuous scores
        let scores: Vec<f64> = (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                if t % 2 == 0 {
                    (u * 10.0).floor() / 10.0
                } else {
                    u
                }
            })
            .collect();
        let (_, auc) = roc(&scores, &truth, 101).unwrap();
        worst_auc = worst_auc.max((auc - pairwise_auc(&scores, &truth)).abs());
    }
    verdict(
        count_mismatch == 0 && worst_acc < 1e-12 && worst_auc < 1e-9,
        format!(
            "{trials} random cases (<= 1000 rows): confusion mismatches {count_mismatch}, max accuracy error {worst_acc:.1e}, max AUC error {worst_auc:.1e} (< 1e-9)"
        ),
    )
}

/// Small end-to-end run whose artifacts are compared byte for byte.
fn pipeline_artifacts(seed: u64) -> Vec<(String, String)> {
    let data = synthetic_grid(600, 13);
    let split: SplitBundle = split_stable_only(&data, 0.9, seed).unwrap();
    let stats = zscore_fit(&split.train_stable).unwrap();
    let x = stats.apply(&split.train_stable).unwrap();
    let g = GeneratorConfig {
        latent_dim: 16,
        hidden: vec![32],
        output_dim: 12,
    };
    let dc = DiscriminatorConfig {
        input_dim: 12,
        hidden: vec![32, 32],
    };
    let mut out = Vec::new();
    let mut models = Vec::new();
    for adversarial_layer in [true, false] {
        let cfg = TrainConfig {
            epochs: 3,
            adversarial_layer,
            seed,
            ..TrainConfig::default()
        };
        let (m, r) = train_with(&x, &stats, g.clone(), dc.clone(), &cfg, |_, _| Ok(())).unwrap();
        out.push((format!("checkpoint-{adversarial_layer}"), m.to_json().unwrap()));
        out.push((format!("losses-{adversarial_layer}"), r.loss_csv()));
        models.push(m);
    }
    let scfg = SurrogateConfig {
        hidden_dim: 8,
        epochs: 1,
        seed,
        ..SurrogateConfig::default()
    };
    let (surrogate, sr) = train_surrogate(&data, stats.clone(), &scfg).unwrap();
    out.push(("surrogate".into(), surrogate.to_json().unwrap()));
    out.push(("surrogate-report".into(), serde_json::to_string(&sr).unwrap()));
    let settings = ScenarioSettings {
        seed,
        gan_grid: gan_stability::attacks::GanGridConfig {
            generator: GeneratorConfig {
                latent_dim: 4,
                hidden: vec![8],
                output_dim: 12,
            },
            episodes: 5,
            samples_per_episode: 8,
            seed,
            ..Default::default()
        },
        gan_grid_samples: 100,
        ..ScenarioSettings::default()
    };
    let inputs = ScenarioInputs {
        model: &models[0],
        baseline: Some(&models[1]),
        surrogate: Some(&surrogate),
        split: &split,
    };
    let eval = run_scenarios(&inputs, &settings).unwrap();
    out.push(("table2-primary".into(), table2_csv(&eval, PRIMARY_MODEL)));
    out.push(("table2-baseline".into(), table2_csv(&eval, BASELINE_MODEL)));
    out.push(("table3".into(), table3_csv(&eval)));
    out.push(("evaluation".into(), serde_json::to_string(&eval).unwrap()));
    out
}

fn c13_determinism() -> Verdict {
    let a = pipeline_artifacts(5);
    let b = pipeline_artifacts(5);
    let differing: Vec<&str> = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| x.1 != y.1)
        .map(|(x, _)| x.0.as_str())
        .collect();
    verdict(
        differing.is_empty() && a.len() == b.len(),
        format!(
            "{} artifacts (checkpoints, loss curves, surrogate, tables, evaluation) compared; differing: {}",
            a.len(),
            if differing.is_empty() {
                "none".to_string()
            } else {
                differing.join(", ")
            }
        ),
    )
}

fn gaussian(n: usize, center: [f64; 2], rng: &mut impl Rng) -> Vec<[f64; 2]> {
    (0..n)
        .map(|_| {
            let a: f64 = StandardNormal.sample(rng);
            let b: f64 = StandardNormal.sample(rng);
            [center[0] + a, center[1] + b]
        })
        .collect()
}

fn c14_geometry() -> Verdict {
    let mut rng = seeded_rng(14);
    let train_pts = gaussian(400, [0.0, 0.0], &mut rng);
    let feats = Matrix::from_rows(&train_pts).unwrap();
    let n = feats.rows();
    let train = Dataset::new(feats, vec![Label::Stable; n], vec![-0.1; n]).unwrap();
    let stats = zscore_fit(&train).unwrap();
    let x = stats.apply(&train).unwrap();
    let cfg = TrainConfig {
        epochs: 200,
        seed: 14,
        ..TrainConfig::default()
    };
    let g = GeneratorConfig {
        output_dim: 2,
        ..GeneratorConfig::default()
    };
    let d = DiscriminatorConfig {
        input_dim: 2,
        ..DiscriminatorConfig::default()
    };
    let start = Instant::now();
    let (model, _) = train_with(&x, &stats, g, d, &cfg, |_, _| Ok(())).unwrap();

    // distance-threshold oracle in normalized space: stable within 1 of the
    // training cloud, unstable at least the margin away from all of it
    let oracle = |p: &Matrix| -> Vec<Option<Label>> {
        let pn = stats.apply_matrix(p).unwrap();
        pn.iter_rows()
            .map(|r| {
                let dmin = x
                    .features
                    .iter_rows()
                    .map(|t| ((r[0] - t[0]).powi(2) + (r[1] - t[1]).powi(2)).sqrt())
                    .fold(f64::INFINITY, f64::min);
                if dmin <= 1.0 {
                    Some(Label::Stable)
                } else if dmin >= cfg.margin {
                    Some(Label::Unstable)
                } else {
                    None
                }
            })
            .collect()
    };
    let near: Vec<[f64; 2]> = gaussian(2000, [0.0, 0.0], &mut rng)
        .into_iter()
        .filter(|p| p[0].hypot(p[1]) <= 1.5)
        .take(500)
        .collect();
    let far: Vec<[f64; 2]> = (0..500)
        .map(|_| {
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            let radius = rng.random_range(8.0..12.0);
            [radius * angle.cos(), radius * angle.sin()]
        })
        .collect();
    let near_m = Matrix::from_rows(&near).unwrap();
    let far_m = Matrix::from_rows(&far).unwrap();
    let on = oracle(&near_m);
    let of = oracle(&far_m);
    let near_pred = model.classify(&near_m).unwrap().labels;
    let far_pred = model.classify(&far_m).unwrap().labels;
    let agree = |pred: &[Label], or: &[Option<Label>]| {
        let judged: Vec<(Label, Label)> = pred.iter().zip(or).filter_map(|(p, o)| o.map(|o| (*p, o))).collect();
        judged.iter().filter(|(p, o)| p == o).count() as f64 / judged.len().max(1) as f64
    };
    let acc_near = agree(&near_pred, &on);
    let acc_far = agree(&far_pred, &of);
    let judged_far = of.iter().filter(|o| o.is_some()).count();
    let ood = model.ood_margin_fraction(&x.features, 500, 1).unwrap();
    verdict(
        acc_near >= 0.95 && acc_far >= 0.95,
        format!(
            "stable near-cluster accuracy {acc_near:.4}, beyond-margin accuracy {acc_far:.4} ({judged_far} oracle-judged), both >= 0.95; generator ood fraction {ood:.3}; {:.0}s",
            start.elapsed().as_secs_f64()
        ),
    )
}

fn c15_loss_shape() -> Verdict {
    let (x, stats) = synthetic_stable(400, 15);
    let cfg = TrainConfig {
        epochs: 40,
        seed: 15,
        ..TrainConfig::default()
    };
    let mut fractions = Vec::new();
    let (_, report) = train_with(
        &x,
        &stats,
        GeneratorConfig::default(),
        DiscriminatorConfig::default(),
        &cfg,
        |rec, tr| {
            if rec.epoch % 5 == 0 {
                fractions.push(tr.model().ood_margin_fraction(&x.features, 500, 99)?);
            }
            Ok(())
        },
    )
    .unwrap();
    let rep10 = report.epochs[9].repulsion_loss;
    let rep_final = report.epochs.last().unwrap().repulsion_loss;
    let mut running_max = f64::NEG_INFINITY;
    let mut worst_drop = 0.0f64;
    for &f in &fractions {
        running_max = running_max.max(f);
        worst_drop = worst_drop.max(running_max - f);
    }
    verdict(
        rep_final < rep10 && worst_drop <= 0.05,
        format!(
            "repulsion epoch 10 {rep10:.4} -> final {rep_final:.4}; ood fraction every 5 epochs {} (largest drop {worst_drop:.3} <= 0.05)",
            fmt_all(&fractions)
        ),
    )
}

fn main() -> ExitCode {
    // keep panics from cluttering the report; failures are reported below
    std::panic::set_hook(Box::new(|_| {}));
    let criteria: [(u32, &str, fn() -> Verdict); 15] = [
        (1, "baseline combined accuracy", c1_baseline_accuracy),
        (2, "adversarially trained classification", c2_at_classification),
        (3, "white-box detection", c3_white_box),
        (4, "grey-box 1 transfer detection", c4_grey_box_transfer),
        (5, "grey-box 2 GAN-GRID detection", c5_gan_grid),
        (6, "AT beats no-AT under white-box attack", c6_ordering),
        (7, "timing shape", c7_timing),
        (8, "gradient checks", c8_gradients),
        (9, "repulsion loss", c9_repulsion),
        (10, "attack budgets", c10_budgets),
        (11, "augmentation", c11_augmentation),
        (12, "metrics and ROC oracles", c12_metrics),
        (13, "determinism", c13_determinism),
        (14, "synthetic geometry", c14_geometry),
        (15, "loss-curve shape", c15_loss_shape),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (id, name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| id.to_string() == *p || name.contains(p.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            verdict(false, format!("error: {msg}"))
        });
        if !v.pass {
            failed += 1;
        }
        println!(
            "{} [{id:>2}] {name}: {} ({:.1}s)",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
