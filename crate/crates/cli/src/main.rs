//! Batch front-end: one subcommand per experiment, CSV outputs and a
//! checksummed manifest per run.

mod commands;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use config::Config;
use output::{OutDir, RunManifest};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] snspd::Error),
    #[error("replay differs: {0}")]
    Mismatch(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn exit_code(&self) -> u8 {
        use snspd::Error as E;
        match self {
            Self::Config(_) => 2,
            Self::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 2,
            Self::Core(
                E::Domain(_) | E::Precondition(_) | E::Parse { .. } | E::Extrapolation { .. } | E::DegenerateTopology(_),
            ) => 2,
            Self::Core(_) => 3,
            _ => 1,
        }
    }
}

impl From<config::ConfigError> for CliError {
    fn from(e: config::ConfigError) -> Self {
        Self::Config(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "snspd", version, about = "Gated and free-running SNSPD simulations", after_help = config::help_text())]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Config file of `key = value` lines (see the key list below).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for the CSV outputs and the manifest.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Overrides the `seed` key.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Log progress to stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Clone, PartialEq, Eq)]
enum Command {
    /// Single time-domain run; writes trace.csv, gates.csv and clicks.csv.
    Simulate,
    /// Peak current of the gates after a detection vs. gate frequency.
    Fig4c,
    /// Maximum gating frequency and next-gate temperature vs. L_k.
    McrSweep,
    /// Return current vs. load resistance and the knee R*.
    TauEMin,
    /// Click trains, autocorrelation, phase histogram, QE/DCR, afterpulsing.
    Stats,
    /// Transconductance of a Touchstone chain and the matching drive.
    Calibrate,
    /// Model S11 against a reference Touchstone file.
    ValidateModel,
    /// Reruns the run recorded in a manifest and checks every checksum;
    /// `--out-dir` redirects the outputs.
    Replay { manifest: PathBuf },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::Fig4c => "fig4c",
            Self::McrSweep => "mcr-sweep",
            Self::TauEMin => "tau-e-min",
            Self::Stats => "stats",
            Self::Calibrate => "calibrate",
            Self::ValidateModel => "validate-model",
            Self::Replay { .. } => "replay",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        [
            Self::Simulate,
            Self::Fig4c,
            Self::McrSweep,
            Self::TauEMin,
            Self::Stats,
            Self::Calibrate,
            Self::ValidateModel,
        ]
        .into_iter()
        .find(|c| c.name() == name)
    }
}

fn run(command: &Command, config_path: &Path, out_dir: &Path, seed: Option<u64>) -> Result<RunManifest, CliError> {
    // absolute paths keep the manifest valid from any working directory
    let config_path = &std::path::absolute(config_path).map_err(|e| CliError::io(config_path, e))?;
    let out_dir = &std::path::absolute(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut cfg = Config::load(config_path)?;
    if let Some(s) = seed {
        cfg.set_count("seed", s);
    }
    let mut out = OutDir::create(out_dir)?;
    match command {
        Command::Simulate => commands::simulate_cmd(&cfg, &mut out)?,
        Command::Fig4c => commands::fig4c(&cfg, &mut out)?,
        Command::McrSweep => commands::mcr_sweep(&cfg, &mut out)?,
        Command::TauEMin => commands::tau_e_min(&cfg, &mut out)?,
        Command::Stats => commands::stats(&cfg, &mut out)?,
        Command::Calibrate => commands::calibrate(&cfg, &mut out)?,
        Command::ValidateModel => commands::validate_model(&cfg, &mut out)?,
        Command::Replay { .. } => unreachable!("replay is dispatched separately"),
    }
    let manifest = RunManifest::build(config_path, command.name(), &out, cfg.count("seed"))?;
    manifest.write()?;
    Ok(manifest)
}

fn replay(manifest_path: &Path, out_dir: Option<&Path>) -> Result<(), CliError> {
    let old = RunManifest::read(manifest_path)?;
    let command = Command::from_name(&old.subcommand)
        .ok_or_else(|| CliError::Config(format!("unknown subcommand '{}' in manifest", old.subcommand)))?;
    let out_dir = out_dir.unwrap_or(&old.out_dir);
    let new = run(&command, &old.config, out_dir, Some(old.seed))?;
    if new.files != old.files {
        let differing: Vec<&str> = old
            .files
            .iter()
            .filter(|f| !new.files.contains(f))
            .map(|f| f.name.as_str())
            .collect();
        return Err(CliError::Mismatch(if differing.is_empty() {
            "different file list".into()
        } else {
            differing.join(", ")
        }));
    }
    log::info!("{} files identical", new.files.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Info
        } else {
            log::LevelFilter::Warn
        })
        .format_timestamp(None)
        .init();
    if cli.workers > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match (&cli.command, &cli.config) {
        (Command::Replay { manifest }, _) => replay(manifest, cli.out_dir.as_deref()),
        (command, Some(path)) => {
            let out = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
            run(command, path, &out, cli.seed).map(|_| ())
        }
        (_, None) => Err(CliError::Config("--config is required".into())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
