//! `lsmsim`: deterministic simulator and experiment harness for memristive
//! liquid-state-machine computing.
//!
//! Exit codes: 0 ok, 2 config error, 3 data error, 4 skipped because a
//! dataset is absent.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lsmsim::commands::{self, ExitError};
use lsmsim::config::Config;

#[derive(Parser)]
#[command(
    name = "lsmsim",
    about = "Memristive liquid-state-machine simulator and experiment harness",
    version
)]
struct Cli {
    /// Experiment config file (`key = value` lines with dotted keys).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override any config key (repeatable), e.g. --set lsm.hidden=200.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Output directory (shorthand for --set output.dir=...).
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured synthetic dataset as native event files.
    GenData,
    /// Train the linear readout on the configured dataset.
    Train,
    /// Evaluate a stored checkpoint; add early_exit.thresholds for the
    /// early-exit study.
    Eval,
    /// Contrastive training on seen classes plus zero-shot retrieval.
    Zeroshot,
    /// Grid sweep over one config key (sweep.parameter / sweep.values).
    Sweep,
    /// Compare LSM count features against time-pooling baselines.
    Ablate,
    /// MAC counts and energy estimates for the configured architecture.
    Cost,
    /// Randomness tests on bits extracted from a sampled conductance array.
    RngTest,
    /// Convert a raw N-MNIST directory tree into the native event format.
    ImportNmnist {
        /// Directory with Train/<digit>/*.bin and Test/<digit>/*.bin.
        #[arg(long)]
        input: PathBuf,
    },
}

fn build_config(cli: &Cli) -> anyhow::Result<Config> {
    let mut cfg = match &cli.config {
        Some(path) => Config::from_file(path)?,
        None => Config::new(),
    };
    cfg.apply_env();
    cfg.apply_overrides(&cli.overrides)?;
    if let Some(out) = &cli.output {
        cfg.set("output.dir", out.to_str().unwrap_or("out"));
    }
    Ok(cfg)
}

fn classify_error(err: &anyhow::Error) -> i32 {
    if let Some(exit) = err.downcast_ref::<ExitError>() {
        return exit.code;
    }
    if err.downcast_ref::<lsmsim::config::ConfigError>().is_some() {
        return 2;
    }
    let msg = err.to_string();
    if msg.starts_with("config error") {
        return 2;
    }
    if msg.starts_with("data error") || err.downcast_ref::<lsmsim_core::Error>().is_some() {
        return 3;
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match build_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    let result = match &cli.command {
        Command::GenData => commands::cmd_gen_data(&cfg),
        Command::Train => commands::cmd_train(&cfg),
        Command::Eval => commands::cmd_eval(&cfg),
        Command::Zeroshot => commands::cmd_zeroshot(&cfg),
        Command::Sweep => commands::cmd_sweep(&cfg),
        Command::Ablate => commands::cmd_ablate(&cfg),
        Command::Cost => commands::cmd_cost(&cfg),
        Command::RngTest => commands::cmd_rng_test(&cfg),
        Command::ImportNmnist { input } => commands::cmd_import_nmnist(&cfg, input),
    };
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(classify_error(&e) as u8)
        }
    }
}
