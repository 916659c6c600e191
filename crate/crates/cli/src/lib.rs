//! Command-line front end: each subcommand reads one JSON [`RunConfig`],
//! writes its outputs plus a `manifest.json` into `--out`, and exits with 0
//! on success, 2 on bad configuration or input, 3 on numeric failure.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::Value;

pub use config::RunConfig;
pub use error::CliError;
use output::OutDir;

#[derive(Debug, Parser)]
#[command(name = "gradmatch", version, about = "Gradient-matching surrogates for offline optimization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config's root seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample an offline dataset from a built-in oracle.
    GenData(CommonArgs),
    /// Train a surrogate on a dataset.
    Train(CommonArgs),
    /// Run gradient ascent on a trained surrogate and score the designs.
    Search(CommonArgs),
    /// Measure surrogate gradient error under input-distribution shift.
    OodEval(CommonArgs),
    /// Check the worst-case gap bounds on a sampled domain.
    BoundCheck(CommonArgs),
    /// Compute mean normalized rank from a score table.
    Mnr(CommonArgs),
    /// Summarize earlier runs into one deterministic report.
    Report(CommonArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GenData(_) => "gen-data",
            Command::Train(_) => "train",
            Command::Search(_) => "search",
            Command::OodEval(_) => "ood-eval",
            Command::BoundCheck(_) => "bound-check",
            Command::Mnr(_) => "mnr",
            Command::Report(_) => "report",
        }
    }

    pub fn args(&self) -> &CommonArgs {
        match self {
            Command::GenData(a)
            | Command::Train(a)
            | Command::Search(a)
            | Command::OodEval(a)
            | Command::BoundCheck(a)
            | Command::Mnr(a)
            | Command::Report(a) => a,
        }
    }
}

/// Runs one command. Returns the line to print on success.
pub fn run(command: &Command) -> Result<String, CliError> {
    let args = command.args();
    let out = OutDir::create(&args.out)?;
    let name = command.name();
    let loaded = match &args.config {
        Some(path) => RunConfig::load(path),
        None => Ok(RunConfig::default()),
    };
    let mut cfg = match loaded {
        Ok(cfg) => cfg,
        Err(e) => {
            out.write_manifest(name, Value::Null, "error")?;
            out.write_error(&e)?;
            return Err(e);
        }
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let resolved = serde_json::to_value(&cfg).map_err(|e| CliError::input(e.to_string()))?;
    out.write_manifest(name, resolved.clone(), "running")?;
    let result = match command {
        Command::GenData(_) => commands::gen_data(&cfg, &out),
        Command::Train(_) => commands::train_cmd(&cfg, &out),
        Command::Search(_) => commands::search_cmd(&cfg, &out),
        Command::OodEval(_) => commands::ood_cmd(&cfg, &out),
        Command::BoundCheck(_) => commands::bound_cmd(&cfg, &out),
        Command::Mnr(_) => commands::mnr_cmd(&cfg, &out),
        Command::Report(_) => commands::report_cmd(&cfg, &out),
    };
    match &result {
        Ok(_) => out.write_manifest(name, resolved, "ok")?,
        Err(e) => {
            out.write_manifest(name, resolved, "error")?;
            out.write_error(e)?;
        }
    }
    result
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli.command) {
        Ok(msg) => {
            println!("{msg}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
