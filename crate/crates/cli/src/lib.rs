//! Command-line pipeline for the GAN stability classifier: data
//! preparation, training, attacks, evaluation tables and timing.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use gan_stability::attacks::AttackKind;
use gan_stability::eval::Scenario;

use crate::commands::Ctx;
use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::manifest::ManifestBuilder;

#[derive(Debug, Parser)]
#[command(
    name = "gan-stability",
    version,
    about = "Adversarially robust GAN-based grid stability classifier",
    after_help = "Any configuration key can be overridden with a flag of the same dotted name, \
                  e.g. --gan.train.margin 3.5 or --attack.iterations=20."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON experiment configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Raw grid-stability CSV.
    #[arg(long, global = true, value_name = "PATH")]
    dataset: Option<PathBuf>,

    #[arg(long, global = true, value_name = "N")]
    epochs: Option<usize>,

    /// Train or attack the baseline without the adversarial layer.
    #[arg(long, global = true)]
    no_adversarial_layer: bool,

    /// Attacks to run (fgsm, bim, rfgsm, pgd, gan-grid).
    #[arg(long, global = true, value_delimiter = ',', value_name = "NAME[,NAME...]")]
    attack: Vec<String>,

    /// Scenarios to run (white-box, grey-box-1, grey-box-2).
    #[arg(long, global = true, value_delimiter = ',', value_name = "NAME[,NAME...]")]
    scenario: Vec<String>,

    /// Small, fast configuration for smoke runs.
    #[arg(long, global = true)]
    quick: bool,

    /// Increase log verbosity (-v debug, -vv trace).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load, augment, split and normalize the dataset.
    Prepare,
    /// Train the GAN; with --surrogate, the recurrent transfer surrogate.
    Train {
        #[arg(long)]
        surrogate: bool,
    },
    /// Generate adversarial batches for the selected scenarios.
    Attack,
    /// Write the detection, classification and ROC tables.
    Evaluate,
    /// Run every stage in order.
    Reproduce,
    /// Time training epochs and inference.
    Bench,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Prepare => "prepare",
            Command::Train { surrogate: false } => "train",
            Command::Train { surrogate: true } => "train-surrogate",
            Command::Attack => "attack",
            Command::Evaluate => "evaluate",
            Command::Reproduce => "reproduce",
            Command::Bench => "bench",
        }
    }
}

/// Pulls `--a.b value` and `--a.b=value` pairs out of `args`.
fn split_overrides(args: Vec<OsString>) -> Result<(Vec<OsString>, Vec<(String, String)>), CliError> {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let text = arg.to_string_lossy().into_owned();
        let Some(flag) = text.strip_prefix("--") else {
            rest.push(arg);
            continue;
        };
        let (name, inline) = match flag.split_once('=') {
            Some((n, v)) => (n.to_string(), Some(v.to_string())),
            None => (flag.to_string(), None),
        };
        if !name.contains('.') {
            rest.push(arg);
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => it
                .next()
                .map(|v| v.to_string_lossy().into_owned())
                .ok_or_else(|| CliError::Usage(format!("--{name} needs a value")))?,
        };
        overrides.push((name, value));
    }
    Ok((rest, overrides))
}

fn build_config(cli: &Cli, overrides: &[(String, String)]) -> Result<ExperimentConfig, CliError> {
    let mut cfg = config::load(cli.config.as_deref(), overrides)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.paths.out = o.clone();
    }
    if let Some(d) = &cli.dataset {
        cfg.paths.dataset = Some(d.clone());
    }
    if let Some(e) = cli.epochs {
        cfg.gan.train.epochs = e;
    }
    if cli.no_adversarial_layer {
        cfg.gan.train.adversarial_layer = false;
    }
    if cli.quick {
        cfg.quick = true;
    }
    if !cli.attack.is_empty() {
        cfg.selection.attacks = cli
            .attack
            .iter()
            .map(|a| a.parse::<AttackKind>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    if !cli.scenario.is_empty() {
        cfg.selection.scenarios = cli
            .scenario
            .iter()
            .map(|s| s.parse::<Scenario>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    cfg.finalize()
}

fn execute(cli: Cli, overrides: &[(String, String)]) -> Result<(), CliError> {
    let cfg = build_config(&cli, overrides)?;
    let ctx = Ctx::new(cfg);
    std::fs::create_dir_all(&ctx.layout.root).map_err(|e| CliError::io(&ctx.layout.root, e))?;
    let mut m = ManifestBuilder::new(
        cli.command.name(),
        ctx.hash.clone(),
        ctx.cfg.seed,
        ctx.cfg.quick,
        &ctx.layout.root,
    );
    let cfg_path = ctx.layout.root.join("config.json");
    gan_stability::checkpoint::write_atomic(&cfg_path, (serde_json::to_string_pretty(&ctx.cfg)? + "\n").as_bytes())?;
    m.add(&cfg_path);
    match cli.command {
        Command::Prepare => commands::prepare(&ctx, &mut m)?,
        Command::Train { surrogate: false } => commands::train(&ctx, &mut m)?,
        Command::Train { surrogate: true } => commands::train_surrogate_cmd(&ctx, &mut m)?,
        Command::Attack => commands::attack(&ctx, &mut m)?,
        Command::Evaluate => commands::evaluate(&ctx, &mut m)?,
        Command::Reproduce => commands::reproduce(&ctx, &mut m)?,
        Command::Bench => commands::bench(&ctx, &mut m)?,
    }
    let path = m.finish()?;
    log::info!("manifest written to {}", path.display());
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run(args: impl IntoIterator<Item = OsString>) -> i32 {
    let (rest, overrides) = match split_overrides(args.into_iter().collect()) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(rest) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    match execute(cli, &overrides) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
