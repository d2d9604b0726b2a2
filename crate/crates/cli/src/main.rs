//! `dqchaos`: spectra, SSQT classification, classical diagnostics and sweeps
//! for driven-dissipative quantum systems.

mod commands;
mod config;
mod meta;
mod sections;
mod sweep;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(dqchaos::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use dqchaos::Error as E;
        match self {
            Self::Usage(_) => 2,
            Self::Core(e) => match e {
                E::ResourceGuard { .. } => 4,
                E::InvalidParameter(_)
                | E::InvalidInput(_)
                | E::InvalidDimension(_)
                | E::DimensionMismatch { .. }
                | E::SiteOutOfRange { .. }
                | E::Io(_) => 2,
                _ => 3,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<dqchaos::Error> for CliError {
    fn from(e: dqchaos::Error) -> Self {
        Self::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Core(e.into())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Core(dqchaos::Error::InvalidInput(e.to_string()))
    }
}

#[derive(Parser, Debug)]
#[command(name = "dqchaos", version, about = "Chaos diagnostics for open quantum systems")]
struct Cli {
    /// More log output (-v debug, -vv trace). `RUST_LOG` overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Only warnings and errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

/// Output and caching flags shared by the model-driven commands.
#[derive(Args, Clone, Debug, Default)]
pub struct RunArgs {
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Eigenbasis cache directory (default: $DQCHAOS_CACHE_DIR or .dqchaos-cache).
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Diagonalize Liouvillians above the memory guard.
    #[arg(long)]
    pub force_large: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Diagonalize a Liouvillian; write its eigenvalues (CSV) and eigenbasis cache.
    Spectrum(commands::SpectrumArgs),
    /// Spacing-ratio statistics of an eigenvalue file or cached spectrum.
    Stats(commands::StatsArgs),
    /// Spectral statistics of quantum trajectories at one snapshot time.
    Ssqt(commands::SsqtArgs),
    /// Run a task over a detuning/drive grid, resumably.
    Sweep(sweep::SweepArgs),
    /// Largest Lyapunov exponent of the mean-field equations.
    Classical(commands::ClassicalArgs),
    /// Truncated-Wigner replica correlator.
    Twa(commands::TwaArgs),
    /// Out-of-time-order correlator from the master equation.
    Otoc(commands::OtocArgs),
    /// Level statistics of the closed Bose-Hubbard Hamiltonian.
    Hstats(commands::HstatsArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => "warn",
        (false, 0) => "info",
        (false, 1) => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let res = match &cli.command {
        Command::Spectrum(a) => commands::spectrum(a),
        Command::Stats(a) => commands::stats(a),
        Command::Ssqt(a) => commands::ssqt(a),
        Command::Sweep(a) => sweep::run(a),
        Command::Classical(a) => commands::classical(a),
        Command::Twa(a) => commands::twa(a),
        Command::Otoc(a) => commands::otoc(a),
        Command::Hstats(a) => commands::hstats(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dqchaos: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
