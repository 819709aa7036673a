//! The pipeline stages behind each subcommand.
//!
//! Output layout under `paths.out`:
//! `splits/`, `checkpoints/`, `reports/`, `attacks/<scenario>/`, `tables/`
//! and `manifests/`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use gan_stability::attacks::{
    gan_grid_train, read_batch_csv, run_gradient_attack, verify_budget, write_batch_csv, AdversarialBatch, AttackKind,
    BudgetReport, ModelOracle,
};
use gan_stability::checkpoint::write_atomic;
use gan_stability::data::{
    augment_sixfold, load_csv, split_stable_only, write_csv, zscore_fit, Dataset, Label, NormStats, SplitBundle,
};
use gan_stability::eval::{
    bench_timing, clean_cells, detection_from_raw, not_performed, render_table2, render_table3, render_timing, roc_csv,
    table2_csv, table3_csv, timing_csv, Evaluation, Scenario, ScenarioReport, BASELINE_MODEL, PRIMARY_MODEL,
};
use gan_stability::gan::{train_with, GanModel};
use gan_stability::surrogate::{train_surrogate, transfer_attack, SurrogateModel};

use crate::config::{Augment, ExperimentConfig};
use crate::error::CliError;
use crate::manifest::{ArtifactMeta, ManifestBuilder, VERSION};

/// Rows in the original, un-augmented dataset.
pub const ORIGINAL_ROWS: usize = 10_000;

const SPLITS: [&str; 4] = ["train_stable", "test_stable", "test_unstable", "full"];
pub const SURROGATE_MODEL: &str = "surrogate";

pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn split(&self, name: &str) -> PathBuf {
        self.root.join("splits").join(format!("{name}.csv"))
    }

    pub fn norm_stats(&self) -> PathBuf {
        self.root.join("splits").join("norm_stats.json")
    }

    pub fn checkpoint(&self, model: &str) -> PathBuf {
        self.root.join("checkpoints").join(format!("{model}.json"))
    }

    pub fn report(&self, name: &str) -> PathBuf {
        self.root.join("reports").join(name)
    }

    pub fn attack(&self, scenario: Scenario, source: &str, kind: AttackKind) -> PathBuf {
        self.root
            .join("attacks")
            .join(scenario.name())
            .join(format!("{source}-{}.csv", kind.name()))
    }

    pub fn attack_file(&self, scenario: Scenario, name: &str) -> PathBuf {
        self.root.join("attacks").join(scenario.name()).join(name)
    }

    pub fn table(&self, name: &str) -> PathBuf {
        self.root.join("tables").join(name)
    }
}

pub struct Ctx {
    pub cfg: ExperimentConfig,
    pub hash: String,
    pub layout: Layout,
}

impl Ctx {
    pub fn new(cfg: ExperimentConfig) -> Self {
        let hash = cfg.hash();
        let layout = Layout::new(cfg.paths.out.clone());
        Self { cfg, hash, layout }
    }

    fn meta(&self, kind: &str) -> ArtifactMeta {
        ArtifactMeta {
            kind: kind.to_string(),
            config_hash: self.hash.clone(),
            seed: self.cfg.seed,
            version: VERSION.to_string(),
            quick: self.cfg.quick,
        }
    }

    fn provenance(&self) -> BTreeMap<String, String> {
        let mut p = BTreeMap::new();
        p.insert("config_hash".into(), self.hash.clone());
        p.insert("seed".into(), self.cfg.seed.to_string());
        p.insert("version".into(), VERSION.to_string());
        p
    }

    /// The model trained with or without the adversarial layer.
    pub fn model_name(&self) -> &'static str {
        if self.cfg.gan.train.adversarial_layer {
            PRIMARY_MODEL
        } else {
            BASELINE_MODEL
        }
    }
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    Ok(())
}

fn write_text(path: &Path, text: &str, m: &mut ManifestBuilder) -> Result<(), CliError> {
    ensure_parent(path)?;
    write_atomic(path, text.as_bytes())?;
    m.add(path);
    Ok(())
}

fn write_meta(ctx: &Ctx, artifact: &Path, kind: &str, m: &mut ManifestBuilder) -> Result<(), CliError> {
    let p = ctx.meta(kind).write(artifact)?;
    m.add(&p);
    Ok(())
}

fn write_dataset(ctx: &Ctx, d: &Dataset, path: &Path, m: &mut ManifestBuilder) -> Result<(), CliError> {
    ensure_parent(path)?;
    let mut buf = Vec::new();
    write_csv(d, &mut buf)?;
    write_atomic(path, &buf)?;
    m.add(path);
    write_meta(ctx, path, "split", m)
}

/// Loads the raw dataset, augments it when configured, subsamples in quick
/// mode, splits it and fits normalization on the stable training rows.
pub fn prepare(ctx: &Ctx, m: &mut ManifestBuilder) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let path = cfg
        .paths
        .dataset
        .as_ref()
        .ok_or_else(|| CliError::Usage("no dataset given (set paths.dataset or pass --dataset)".into()))?;
    if !path.exists() {
        return Err(CliError::Usage(format!("dataset {} does not exist", path.display())));
    }
    let (raw, report) = load_csv(path).map_err(|e| match e {
        gan_stability::Error::Schema(msg) => CliError::Usage(format!("{}: schema error: {msg}", path.display())),
        gan_stability::Error::Parse { row, column, message } => {
            CliError::Usage(format!("{}: row {row}, column '{column}': {message}", path.display()))
        }
        other => other.into(),
    })?;
    log::info!("loaded {} rows from {}", report.rows, path.display());
    let augment = match cfg.data.augment {
        Augment::Always => true,
        Augment::Never => false,
        Augment::Auto => raw.len() == ORIGINAL_ROWS,
    };
    let mut full = if augment { augment_sixfold(&raw)? } else { raw };
    if augment {
        log::info!("augmented to {} rows", full.len());
    }
    if cfg.quick {
        full = full.subsample(cfg.data.quick_rows, cfg.seed);
        log::info!("quick mode: subsampled to {} rows", full.len());
    }
    let split = split_stable_only(&full, cfg.data.train_frac, cfg.seed)?;
    let mut stats = zscore_fit(&split.train_stable)?;
    stats.seed = Some(cfg.seed);
    log::info!(
        "split: {} train stable, {} test stable, {} test unstable",
        split.train_stable.len(),
        split.test_stable.len(),
        split.test_unstable.len()
    );

    let l = &ctx.layout;
    write_dataset(ctx, &split.train_stable, &l.split("train_stable"), m)?;
    write_dataset(ctx, &split.test_stable, &l.split("test_stable"), m)?;
    write_dataset(ctx, &split.test_unstable, &l.split("test_unstable"), m)?;
    write_dataset(ctx, &full, &l.split("full"), m)?;
    let np = l.norm_stats();
    stats.save(&np)?;
    m.add(&np);
    write_meta(ctx, &np, "norm-stats", m)
}

pub struct Prepared {
    pub split: SplitBundle,
    pub full: Dataset,
    pub stats: NormStats,
}

fn missing_splits(l: &Layout) -> Vec<String> {
    let mut missing: Vec<String> = SPLITS
        .iter()
        .map(|s| l.split(s))
        .chain(std::iter::once(l.norm_stats()))
        .filter(|p| !p.exists())
        .map(|p| format!("{} (run `gan-stability prepare`)", p.display()))
        .collect();
    missing.dedup();
    missing
}

pub fn load_prepared(ctx: &Ctx) -> Result<Prepared, CliError> {
    let l = &ctx.layout;
    let missing = missing_splits(l);
    if !missing.is_empty() {
        return Err(CliError::MissingInputs(missing));
    }
    let load = |name: &str| -> Result<Dataset, CliError> { Ok(load_csv(l.split(name))?.0) };
    Ok(Prepared {
        split: SplitBundle {
            train_stable: load("train_stable")?,
            test_stable: load("test_stable")?,
            test_unstable: load("test_unstable")?,
        },
        full: load("full")?,
        stats: NormStats::load(l.norm_stats())?,
    })
}

fn check_hash(ctx: &Ctx, artifact: &Path) {
    match ArtifactMeta::read(artifact) {
        Ok(meta) if meta.config_hash != ctx.hash => log::warn!(
            "{} was produced with config {} but the current config is {}",
            artifact.display(),
            &meta.config_hash[..12.min(meta.config_hash.len())],
            &ctx.hash[..12]
        ),
        Ok(_) => {}
        Err(e) => log::warn!("no provenance for {}: {e}", artifact.display()),
    }
}

/// Trains the GAN (with or without the adversarial layer per config).
pub fn train(ctx: &Ctx, m: &mut ManifestBuilder) -> Result<(), CliError> {
    let p = load_prepared(ctx)?;
    check_hash(ctx, &ctx.layout.norm_stats());
    let cfg = &ctx.cfg;
    let name = ctx.model_name();
    let x = p.stats.apply(&p.split.train_stable)?;
    log::info!(
        "training {name}: {} rows, {} epochs, adversarial layer {}",
        x.len(),
        cfg.gan.train.epochs,
        if cfg.gan.train.adversarial_layer { "on" } else { "off" }
    );
    let (model, report) = train_with(
        &x,
        &p.stats,
        cfg.gan.generator.clone(),
        cfg.gan.discriminator.clone(),
        &cfg.gan.train,
        |_, _| Ok(()),
    )?;
    let ck = ctx.layout.checkpoint(name);
    ensure_parent(&ck)?;
    model.save_checkpoint(&ck)?;
    m.add(&ck);
    write_meta(ctx, &ck, "gan-checkpoint", m)?;
    let losses = ctx.layout.report(&format!("{name}-losses.csv"));
    write_text(&losses, &report.loss_csv(), m)?;
    write_meta(ctx, &losses, "loss-curve", m)?;
    write_text(
        &ctx.layout.report(&format!("{name}-epoch-times.csv")),
        &report.timing_csv(),
        m,
    )?;
    let margin = model.ood_margin_fraction(&x.features, 500, cfg.seed)?;
    log::info!("{name}: fraction of generated rows beyond the margin: {margin:.3}");
    Ok(())
}

/// Trains the recurrent surrogate on the leading rows of the full dataset.
pub fn train_surrogate_cmd(ctx: &Ctx, m: &mut ManifestBuilder) -> Result<(), CliError> {
    let p = load_prepared(ctx)?;
    check_hash(ctx, &ctx.layout.norm_stats());
    let (model, report) = train_surrogate(&p.full, p.stats.clone(), &ctx.cfg.surrogate)?;
    log::info!(
        "surrogate: held-out window accuracy {:.4} (stable prior {:.3})",
        report.heldout_accuracy,
        report.heldout_stable_prior
    );
    let ck = ctx.layout.checkpoint(SURROGATE_MODEL);
    ensure_parent(&ck)?;
    model.save_checkpoint(&ck)?;
    m.add(&ck);
    write_meta(ctx, &ck, "surrogate-checkpoint", m)?;
    let rp = ctx.layout.report("surrogate.json");
    write_text(&rp, &(serde_json::to_string_pretty(&report)? + "\n"), m)
}

fn load_models(ctx: &Ctx) -> Result<Vec<(&'static str, GanModel)>, CliError> {
    let mut models = Vec::new();
    for name in [PRIMARY_MODEL, BASELINE_MODEL] {
        let path = ctx.layout.checkpoint(name);
        if path.exists() {
            models.push((name, GanModel::load_checkpoint(&path)?));
        }
    }
    if models.is_empty() {
        return Err(CliError::MissingInputs(vec![
            format!(
                "{} (run `gan-stability train`)",
                ctx.layout.checkpoint(PRIMARY_MODEL).display()
            ),
            format!(
                "{} (run `gan-stability train --no-adversarial-layer`)",
                ctx.layout.checkpoint(BASELINE_MODEL).display()
            ),
        ]));
    }
    Ok(models)
}

fn export(
    ctx: &Ctx,
    batch: &AdversarialBatch,
    path: &Path,
    extra: BTreeMap<String, String>,
    m: &mut ManifestBuilder,
) -> Result<(), CliError> {
    ensure_parent(path)?;
    let mut prov = ctx.provenance();
    prov.extend(extra);
    let side = write_batch_csv(batch, path, &prov)?;
    m.add(path);
    m.add(&side);
    Ok(())
}

fn scenario_attacks(ctx: &Ctx, scenario: Scenario) -> Vec<AttackKind> {
    AttackKind::ALL
        .into_iter()
        .filter(|&k| scenario.performs(k) && ctx.cfg.selection.attacks.contains(&k))
        .collect()
}

/// Runs the selected attacks under the selected scenarios against every
/// trained model and exports the batches.
pub fn attack(ctx: &Ctx, m: &mut ManifestBuilder) -> Result<(), CliError> {
    let p = load_prepared(ctx)?;
    let models = load_models(ctx)?;
    let cfg = &ctx.cfg;
    let test_all = p.split.test_all()?;
    let scenarios = &cfg.selection.scenarios;
    if scenarios.contains(&Scenario::GreyBox1) && !ctx.layout.checkpoint(SURROGATE_MODEL).exists() {
        return Err(CliError::MissingInputs(vec![format!(
            "{} (run `gan-stability train --surrogate`)",
            ctx.layout.checkpoint(SURROGATE_MODEL).display()
        )]));
    }

    for &scenario in scenarios {
        match scenario {
            Scenario::Baseline => {}
            Scenario::WhiteBox => {
                for (name, model) in &models {
                    let mut model = model.clone();
                    let stats = model.norm_stats().clone();
                    let x = stats.apply_matrix(&test_all.features)?;
                    let mut budgets: BTreeMap<String, BudgetReport> = BTreeMap::new();
                    for kind in scenario_attacks(ctx, scenario) {
                        let batch = run_gradient_attack(
                            kind,
                            model.discriminator_mut(),
                            &x,
                            &test_all.labels,
                            &cfg.attack,
                            cfg.seed,
                        )?
                        .with_norm_stats(stats.clone());
                        let budget = verify_budget(&batch)?.into_result()?;
                        log::info!("white-box {kind} on {name}: max L-inf {:.6}", budget.max_linf);
                        let mut extra = BTreeMap::new();
                        extra.insert("target_model".into(), name.to_string());
                        extra.insert("max_linf".into(), budget.max_linf.to_string());
                        export(ctx, &batch, &ctx.layout.attack(scenario, name, kind), extra, m)?;
                        budgets.insert(kind.name().into(), budget);
                    }
                    if !budgets.is_empty() {
                        let bp = ctx.layout.attack_file(scenario, &format!("{name}-budget.json"));
                        write_text(
                            &bp,
                            &(serde_json::to_string_pretty(&budget_summary(&budgets))? + "\n"),
                            m,
                        )?;
                    }
                }
            }
            Scenario::GreyBox1 => {
                let mut surrogate = SurrogateModel::load_checkpoint(ctx.layout.checkpoint(SURROGATE_MODEL))?;
                let rows = p.split.test_stable.concat(&p.split.test_unstable)?;
                let mut budgets = BTreeMap::new();
                for kind in scenario_attacks(ctx, scenario) {
                    let t = transfer_attack(&mut surrogate, kind, &cfg.attack, &rows, cfg.seed)?;
                    let budget = verify_budget(&t.batch)?.into_result()?;
                    log::info!(
                        "transfer {kind}: {} rows, surrogate fooled on {:.3} of windows",
                        t.batch.len(),
                        t.surrogate_fooling_rate
                    );
                    let mut extra = BTreeMap::new();
                    extra.insert("source_model".into(), SURROGATE_MODEL.into());
                    extra.insert("surrogate_fooling_rate".into(), t.surrogate_fooling_rate.to_string());
                    extra.insert(
                        "surrogate_clean_accuracy".into(),
                        t.surrogate_clean_accuracy.to_string(),
                    );
                    extra.insert("max_linf".into(), budget.max_linf.to_string());
                    export(
                        ctx,
                        &t.batch,
                        &ctx.layout.attack(scenario, SURROGATE_MODEL, kind),
                        extra,
                        m,
                    )?;
                    budgets.insert(kind.name().to_string(), budget);
                }
                if !budgets.is_empty() {
                    let bp = ctx
                        .layout
                        .attack_file(scenario, &format!("{SURROGATE_MODEL}-budget.json"));
                    write_text(
                        &bp,
                        &(serde_json::to_string_pretty(&budget_summary(&budgets))? + "\n"),
                        m,
                    )?;
                }
            }
            Scenario::GreyBox2 => {
                if !cfg.selection.attacks.contains(&AttackKind::GanGrid) {
                    continue;
                }
                for (name, model) in &models {
                    let mut oracle = ModelOracle::new(model, cfg.evaluation.expose_scores);
                    let result = gan_grid_train(&mut oracle, &cfg.gan_grid)?;
                    let samples = result.samples(cfg.evaluation.gan_grid_samples, cfg.seed.wrapping_add(1))?;
                    log::info!(
                        "gan-grid against {name}: {} queries, best episode success {:.3}",
                        result.queries,
                        result.success_rate
                    );
                    let batch = AdversarialBatch {
                        attack: AttackKind::GanGrid,
                        x_clean: None,
                        true_labels: vec![Label::Unstable; samples.rows()],
                        x_adv: samples,
                        config: cfg.attack,
                        seed: cfg.gan_grid.seed,
                        norm_stats: None,
                    };
                    let mut extra = BTreeMap::new();
                    extra.insert("target_model".into(), name.to_string());
                    extra.insert("queries".into(), result.queries.to_string());
                    extra.insert("success_rate".into(), result.success_rate.to_string());
                    extra.insert("best_episode".into(), result.best_episode.to_string());
                    export(
                        ctx,
                        &batch,
                        &ctx.layout.attack(scenario, name, AttackKind::GanGrid),
                        extra,
                        m,
                    )?;
                    let mut log_csv = String::from("episode,success_rate,cumulative_queries\n");
                    let per = cfg.gan_grid.samples_per_episode as u64;
                    for (i, s) in result.episode_success.iter().enumerate() {
                        log_csv += &format!("{i},{s},{}\n", (i as u64 + 1) * per);
                    }
                    let lp = ctx
                        .layout
                        .attack_file(scenario, &format!("{name}-gan-grid-queries.csv"));
                    write_text(&lp, &log_csv, m)?;
                }
            }
        }
    }
    Ok(())
}

#[derive(serde::Serialize)]
struct BudgetSummary {
    attack: String,
    budget: f64,
    rows: usize,
    max_linf: f64,
    max_l2: f64,
    violations: Vec<usize>,
}

fn budget_summary(b: &BTreeMap<String, BudgetReport>) -> Vec<BudgetSummary> {
    b.iter()
        .map(|(k, r)| BudgetSummary {
            attack: k.clone(),
            budget: r.budget,
            rows: r.linf.len(),
            max_linf: r.max_linf,
            max_l2: r.l2.iter().copied().fold(0.0, f64::max),
            violations: r.violations.clone(),
        })
        .collect()
}

/// Source of an exported batch for `scenario` evaluated on `model`.
fn batch_source(scenario: Scenario, model: &str) -> &str {
    if scenario == Scenario::GreyBox1 {
        SURROGATE_MODEL
    } else {
        model
    }
}

/// Computes clean metrics and scores every exported attack batch, writing
/// the report tables. Inputs produced under different configs are refused.
pub fn evaluate(ctx: &Ctx, m: &mut ManifestBuilder) -> Result<(), CliError> {
    let p = load_prepared(ctx)?;
    let models = load_models(ctx)?;
    let cfg = &ctx.cfg;
    let l = &ctx.layout;

    let mut hashes: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut note = |path: &Path, hash: String| {
        hashes.entry(hash).or_default().insert(path.display().to_string());
    };
    note(&l.norm_stats(), ArtifactMeta::read(&l.norm_stats())?.config_hash);
    for (name, _) in &models {
        let ck = l.checkpoint(name);
        note(&ck, ArtifactMeta::read(&ck)?.config_hash);
    }

    let mut batches = BTreeMap::new();
    for &scenario in &cfg.selection.scenarios {
        for (name, _) in &models {
            for kind in AttackKind::ALL.into_iter().filter(|&k| scenario.performs(k)) {
                let path = l.attack(scenario, batch_source(scenario, name), kind);
                if batches.contains_key(&path) || !path.exists() {
                    continue;
                }
                let b = read_batch_csv(&path)?;
                let h = b
                    .sidecar
                    .provenance
                    .get("config_hash")
                    .cloned()
                    .unwrap_or_else(|| "<none>".into());
                note(&path, h);
                batches.insert(path, b);
            }
        }
    }
    if hashes.len() > 1 {
        let detail = hashes
            .iter()
            .map(|(h, files)| {
                format!(
                    "{}: {}",
                    &h[..12.min(h.len())],
                    files.iter().cloned().collect::<Vec<_>>().join(", ")
                )
            })
            .collect::<Vec<_>>()
            .join("; ");
        return Err(CliError::MixedHashes(detail));
    }
    let input_hash = hashes.keys().next().cloned().unwrap_or_default();

    let mut eval = Evaluation {
        reports: Vec::new(),
        clean: Vec::new(),
    };
    let provenance = |name: &str, model: &GanModel| {
        let mut pr = BTreeMap::new();
        pr.insert("model".to_string(), name.to_string());
        pr.insert("model_seed".to_string(), model.seed().to_string());
        pr.insert(
            "adversarial_layer".to_string(),
            model.train_config().adversarial_layer.to_string(),
        );
        pr.insert("config_hash".to_string(), input_hash.clone());
        pr.insert("checkpoint".to_string(), format!("checkpoints/{name}.json"));
        pr
    };
    for (name, model) in &models {
        let (cells, clean) = clean_cells(name, model, &p.split, cfg.evaluation.roc_thresholds)?;
        eval.reports.push(ScenarioReport {
            scenario: Scenario::Baseline,
            model: name.to_string(),
            cells,
            provenance: provenance(name, model),
        });
        eval.clean.extend(clean);
    }
    for scenario in [Scenario::WhiteBox, Scenario::GreyBox1, Scenario::GreyBox2] {
        if !cfg.selection.scenarios.contains(&scenario) {
            continue;
        }
        for (name, model) in &models {
            let mut cells = Vec::new();
            let mut any = false;
            for kind in AttackKind::ALL {
                let path = l.attack(scenario, batch_source(scenario, name), kind);
                match batches.get(&path) {
                    Some(b) if scenario.performs(kind) => {
                        any = true;
                        let max_linf = b.sidecar.provenance.get("max_linf").and_then(|v| v.parse().ok());
                        let queries = b.sidecar.provenance.get("queries").and_then(|v| v.parse().ok());
                        cells.push(detection_from_raw(model, kind, &b.adv, max_linf, queries)?);
                    }
                    _ => cells.push(not_performed(kind)),
                }
            }
            if !any {
                log::warn!(
                    "no {} batches for {name}; run `gan-stability attack` first",
                    scenario.name()
                );
                continue;
            }
            let mut pr = provenance(name, model);
            pr.insert("attack_seed".into(), cfg.seed.to_string());
            eval.reports.push(ScenarioReport {
                scenario,
                model: name.to_string(),
                cells,
                provenance: pr,
            });
        }
    }

    let mut text = String::new();
    for (name, _) in &models {
        if eval
            .reports
            .iter()
            .any(|r| r.model == *name && r.scenario != Scenario::Baseline)
        {
            write_text(&l.table(&format!("table2-{name}.csv")), &table2_csv(&eval, name), m)?;
            text += &render_table2(&eval, name);
            text.push('\n');
        }
    }
    if !text.is_empty() {
        write_text(&l.table("table2.txt"), &text, m)?;
    }
    write_text(&l.table("table3.csv"), &table3_csv(&eval), m)?;
    write_text(&l.table("table3.txt"), &render_table3(&eval), m)?;
    for c in &eval.clean {
        write_text(&l.table(&format!("roc-{}.csv", c.model)), &roc_csv(&c.roc), m)?;
    }
    write_text(
        &l.table("evaluation.json"),
        &(serde_json::to_string_pretty(&eval)? + "\n"),
        m,
    )?;
    println!("{}", render_table3(&eval));
    if !text.is_empty() {
        println!("{text}");
    }
    Ok(())
}

/// Times training epochs with and without the adversarial layer and
/// one-batch inference.
pub fn bench(ctx: &Ctx, m: &mut ManifestBuilder) -> Result<(), CliError> {
    let p = load_prepared(ctx)?;
    let cfg = &ctx.cfg;
    let x = p.stats.apply_matrix(&p.split.train_stable.features)?;
    let report = bench_timing(
        &x,
        &p.stats,
        &cfg.gan.generator,
        &cfg.gan.discriminator,
        &cfg.gan.train,
        &cfg.timing,
    )?;
    write_text(&ctx.layout.table("timing.csv"), &timing_csv(&report), m)?;
    let text = render_timing(&report);
    write_text(&ctx.layout.table("timing.txt"), &text, m)?;
    println!("{text}");
    Ok(())
}

/// prepare, train with and without the adversarial layer, surrogate,
/// attacks, evaluation and timing, halting at the first failing stage.
pub fn reproduce(ctx: &Ctx, m: &mut ManifestBuilder) -> Result<(), CliError> {
    prepare(ctx, m).map_err(|e| e.in_stage("prepare"))?;
    for adversarial_layer in [true, false] {
        let mut cfg = ctx.cfg.clone();
        cfg.gan.train.adversarial_layer = adversarial_layer;
        let sub = Ctx::new(cfg);
        train(&sub, m).map_err(|e| e.in_stage("train"))?;
    }
    train_surrogate_cmd(ctx, m).map_err(|e| e.in_stage("surrogate"))?;
    attack(ctx, m).map_err(|e| e.in_stage("attack"))?;
    evaluate(ctx, m).map_err(|e| e.in_stage("evaluate"))?;
    bench(ctx, m).map_err(|e| e.in_stage("bench"))?;
    Ok(())
}
