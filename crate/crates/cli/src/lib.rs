//! Batch front end: single runs, variance studies, η sweeps and the
//! Monte Carlo oracle.

use std::ffi::OsString;
use std::path::PathBuf;

use antisync::config::KeyValues;
use antisync::Error;
use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod stats;

pub use config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_ORACLE: i32 = 4;
pub const EXIT_IO: i32 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "antisync",
    version,
    about = "Phase anti-synchronization of a mechanical oscillator and an atomic ensemble"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// `key = value` file; see the README for the keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Override one key, e.g. `--set eta=2500`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Mean-field run: trajectory.csv, phases.csv, summary.json.
    Simulate,
    /// Covariance propagation: covariance.csv, variance.csv.
    Variance,
    /// η sweep: sweep.csv.
    Sweep,
    /// Lyapunov against Euler–Maruyama: oracle.csv; fails above the z limit.
    Oracle,
}

#[derive(Debug)]
pub enum Failure {
    Config(Error),
    Numerical(Error),
    Io(Error),
    Oracle { max_z: f64, limit: f64 },
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Numerical(_) => EXIT_NUMERICAL,
            Failure::Io(_) => EXIT_IO,
            Failure::Oracle { .. } => EXIT_ORACLE,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "configuration error: {e}"),
            Failure::Numerical(e) => write!(f, "numerical failure: {e}"),
            Failure::Io(e) => write!(f, "{e}"),
            Failure::Oracle { max_z, limit } => {
                write!(f, "oracle failed: max z-score {max_z:.3} exceeds {limit}")
            }
        }
    }
}

fn classify(e: Error) -> Failure {
    match e {
        Error::Io(_) => Failure::Io(e),
        other => Failure::Numerical(other),
    }
}

/// Merges the config file, `--set` overrides and the dedicated flags, in that order.
pub fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| Failure::Io(Error::Io(e)))?,
        None => String::new(),
    };
    let mut kv = KeyValues::parse(&text).map_err(Failure::Config)?;
    for o in &cli.overrides {
        kv.apply_override(o).map_err(Failure::Config)?;
    }
    if let Some(out) = &cli.out {
        kv.set("out", &out.to_string_lossy());
    }
    if let Some(seed) = cli.seed {
        kv.set("seed", &seed.to_string());
    }
    RunConfig::from_key_values(kv).map_err(Failure::Config)
}

/// Runs one command and returns a line for the terminal.
pub fn execute(cli: &Cli) -> Result<String, Failure> {
    let cfg = load_config(cli)?;
    match cli.command {
        Command::Simulate => {
            let o = commands::cmd_simulate(&cfg).map_err(classify)?;
            let l = &o.phases.locking;
            Ok(format!(
                "locked = {} (phase sum {:.4} rad, trailing std {:.3e}); limit cycle converged = {}",
                l.locked, l.locked_value, l.trailing_std, o.limit_cycle.converged
            ))
        }
        Command::Variance => {
            let o = commands::cmd_variance(&cfg).map_err(classify)?;
            let mut msg = format!("{} covariance runs written", o.runs.len());
            if let Some(f) = o.ordered_fraction {
                msg += &format!(
                    "; first curve at or below second at {:.1}% of post-transient samples",
                    100.0 * f
                );
            }
            Ok(msg)
        }
        Command::Sweep => {
            let o = commands::cmd_sweep(&cfg).map_err(classify)?;
            let failed = o.rows.iter().filter(|r| r.status != "ok").count();
            let rho = o
                .spearman
                .map_or("undefined".to_string(), |r| format!("{r:.4}"));
            Ok(format!(
                "{} grid points ({failed} not ok); Spearman(locked phase sum, D_G) = {rho}",
                o.rows.len()
            ))
        }
        Command::Oracle => {
            let o = commands::cmd_oracle(&cfg).map_err(classify)?;
            if o.passed {
                Ok(format!("oracle passed: max z-score {:.3}", o.max_z))
            } else {
                Err(Failure::Oracle {
                    max_z: o.max_z,
                    limit: cfg.z_limit,
                })
            }
        }
    }
}

/// Parses `args`, runs, prints, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(msg) => {
            println!("{msg}");
            EXIT_OK
        }
        Err(f) => {
            eprintln!("antisync: {f}");
            f.exit_code()
        }
    }
}
