//! Command-line driver: `extract`, `train`, `eval` and `compare`.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage or
//! configuration errors.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;

/// A problem with the invocation or configuration rather than the data.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "aptrigger",
    version,
    about = "Adverbial presupposition trigger detection"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Global seed, overriding the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output root, overriding paths.out.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Override a config key, e.g. `--set model.recurrent.hidden=16`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mine positive and negative samples from the corpus.
    Extract {
        #[command(flatten)]
        common: Common,
    },
    /// Train the configured model on one dataset.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate a checkpoint on a dataset split.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        /// Dataset to read; defaults to the one the checkpoint was trained on.
        #[arg(long)]
        dataset: Option<String>,
    },
    /// Contingency table and McNemar test for two checkpoints.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        a: PathBuf,
        #[arg(long, value_name = "PATH")]
        b: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
    },
}

fn load(common: &Common) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::load(common.config.as_deref(), &common.overrides, common.seed)?;
    if let Some(out) = &common.out {
        cfg.paths.out = out.clone();
    }
    Ok(cfg)
}

fn check_split(split: &str) -> anyhow::Result<()> {
    match split {
        "train" | "dev" | "test" => Ok(()),
        other => Err(UsageError(format!(
            "unknown split {other:?}; expected train, dev or test"
        ))
        .into()),
    }
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> anyhow::Result<()> {
    match &cli.command {
        Command::Extract { common } => commands::extract(&load(common)?, out),
        Command::Train { common } => commands::train_cmd(&load(common)?, out),
        Command::Eval {
            common,
            checkpoint,
            split,
            dataset,
        } => {
            check_split(split)?;
            commands::eval_cmd(&load(common)?, checkpoint, split, dataset.as_deref(), out).map(drop)
        }
        Command::Compare {
            common,
            a,
            b,
            split,
        } => {
            check_split(split)?;
            commands::compare_cmd(&load(common)?, a, b, split, out).map(drop)
        }
    }
}

/// Exit code for a failed command.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<UsageError>().is_some() {
        return EXIT_USAGE;
    }
    match err.downcast_ref::<aptrigger::Error>() {
        Some(e) if e.is_usage() => EXIT_USAGE,
        _ => EXIT_RUNTIME,
    }
}

/// Parse `args` (program name first), run, and return the exit code.
/// Diagnostics go to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            exit_code(&e)
        }
    }
}
