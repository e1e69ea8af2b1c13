//! Command-line front end: JSON run configs, CSV/JSON/BPLT outputs and a
//! manifest with SHA-256 digests of every emitted file.

mod commands;
mod config;
mod manifest;
mod snapshot;

pub use commands::{execute, Execution, DEFAULT_OUTPUT};
pub use config::{
    parse_config, AbsorbConfig, AuditConfig, ConvergeConfig, DiffConfig, DomainConfig,
    ExperimentConfig, InitialData, PhysicsConfig, Profile, RunConfig, StepperSection,
    DEFAULT_RESOLUTION, STEPS_PER_PERIOD,
};
pub use manifest::{sha256_hex, FileEntry, RunManifest, RunStatus, MANIFEST_FILE};
pub use snapshot::{Snapshot, FORMAT_VERSION, MAGIC};

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Run one trajectory and write its energy series and snapshots.
    Simulate,
    /// Energy balance, multiplier, observability and decomposition audits.
    Audit,
    /// Absorbing-ball experiment over a family of initial energies.
    Absorb,
    /// Two nearby trajectories and their difference.
    Diff,
    /// Simultaneous dt and spacing halving with observed orders.
    Converge,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Audit => "audit",
            Command::Absorb => "absorb",
            Command::Diff => "diff",
            Command::Converge => "converge",
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "berger-lab",
    version,
    about = "Berger plate laboratory with boundary damping",
    override_usage = "berger-lab <simulate|audit|absorb|diff|converge> --config <path> [--out <dir>] [--seed <u64>]"
)]
pub struct Cli {
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, value_name = "path")]
    pub config: PathBuf,
    /// Output directory; overrides the document.
    #[arg(long, value_name = "dir")]
    pub out: Option<PathBuf>,
    /// Seed for random profiles; overrides the document.
    #[arg(long, value_name = "u64")]
    pub seed: Option<u64>,
}

/// Exit code for an error: 1 for anything the user can fix in the config or
/// the environment, 2 for numerical breakdown.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::PicardNonConvergence { .. }
        | Error::NonFinite { .. }
        | Error::SingularMatrix { .. }
        | Error::EigenNonConvergence { .. }
        | Error::Unclosed { .. }
        | Error::MeshMismatch
        | Error::WindowOutsideRecord { .. }
        | Error::RecordMismatch(_) => EXIT_NUMERICAL,
        _ => EXIT_CONFIG,
    }
}

/// Reads, overrides and executes; returns the manifest on success.
pub fn run(cli: &Cli) -> Result<Execution, Error> {
    let text = std::fs::read_to_string(&cli.config)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", cli.config.display())))?;
    let mut cfg = parse_config(&text)?;
    if let Some(out) = &cli.out {
        cfg.output = Some(out.clone());
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    execute(cli.command, &cfg)
}

/// Full program: argument parsing, execution, reporting. Returns the exit
/// code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() {
                EXIT_CONFIG
            } else {
                EXIT_OK
            };
        }
    };
    match run(&cli) {
        Ok(execution) => {
            let m = &execution.manifest;
            println!(
                "{}: {} file(s) in {}",
                m.command,
                m.files.len(),
                execution.output_dir.display()
            );
            if execution.numerical_failure() {
                for f in &m.failures {
                    eprintln!("numerical failure: {f}");
                }
                EXIT_NUMERICAL
            } else {
                EXIT_OK
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}

#[cfg(test)]
mod tests;
