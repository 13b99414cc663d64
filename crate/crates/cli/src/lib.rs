//! Command-line front end: config parsing, run drivers and file output.

pub mod config;
pub mod output;
pub mod plot;
pub mod run;

use std::ffi::OsString;
use std::path::PathBuf;
use std::str::FromStr;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use radpair::Theory;

pub use config::{emit, parse_config, RunConfig};
pub use run::{Command, Overrides};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
/// Malformed command line (BSD `EX_USAGE`).
pub const EXIT_USAGE: i32 = 64;

/// Environment variable holding the trajectory worker count.
pub const THREADS_ENV: &str = "RADPAIR_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime failure: {0}")]
    Runtime(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) | CliError::Io(_) => EXIT_RUNTIME,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "radpair", version, about = "Radical-pair spin dynamics under competing reaction theories")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Integrate the master equation and write the per-step record.
    Simulate(CommonArgs),
    /// Run the single-molecule trajectory ensemble.
    Trajectories(CommonArgs),
    /// Integrate both reaction theories side by side.
    Compare(CommonArgs),
    /// Evaluate the coherence measure of the initial state.
    Coherence(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// TOML run configuration.
    config: PathBuf,
    /// Overrides `trajectories.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `integrator.theory` (kominis, traditional, nonreacting).
    #[arg(long, value_parser = Theory::from_str)]
    theory: Option<Theory>,
    /// Directory for all output files.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got `{value}`")))?;
    // A second call in the same process is harmless; keep the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn execute(command: Command, args: CommonArgs) -> Result<run::RunOutput, CliError> {
    configure_threads()?;
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("{}: {e}", args.config.display())))?;
    let mut cfg = parse_config(&text)?;
    Overrides { seed: args.seed, theory: args.theory }.apply(&mut cfg);
    run::run(command, &cfg, &args.out_dir)
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let (command, args) = match cli.command {
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::Trajectories(a) => (Command::Trajectories, a),
        Cmd::Compare(a) => (Command::Compare, a),
        Cmd::Coherence(a) => (Command::Coherence, a),
    };
    match execute(command, args) {
        Ok(out) => {
            for line in out.lines {
                println!("{line}");
            }
            for file in out.files {
                eprintln!("wrote {}", file.display());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
