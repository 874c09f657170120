mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lsicert::coupling::ModelSpec;
use lsicert::error::Error;

use config::{Format, RunConfig};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "LSICERT_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "lsicert",
    version,
    about = "Log-Sobolev certificates and numerical checks for spin systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Args)]
struct Flags {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory [default: $LSICERT_OUT_DIR, else stdout].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Single-spin log-Sobolev constant (required for n ≥ 2).
    #[arg(long, global = true)]
    gamma: Option<f64>,
    /// Spin dimension n.
    #[arg(long = "spin-dim", global = true)]
    spin_dim: Option<usize>,
    /// Smoothing scale c.
    #[arg(long, global = true)]
    c: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Certify the log-Sobolev inequality for a coupling matrix.
    Certify {
        /// Matrix JSON `{"n", "rows"}`; overrides the configured model.
        matrix: Option<PathBuf>,
    },
    /// Split the coupling and check the renormalised single-site potential.
    Renormalize { matrix: Option<PathBuf> },
    /// Tilted single-spin moments and the variance bound.
    SpinStudy,
    /// Relaxation-time study of the spin dynamics.
    Simulate,
    /// Exact-enumeration checks on small Ising systems.
    Oracle { matrix: Option<PathBuf> },
    /// Certified fraction of SK couplings across β and N.
    GoeSweep,
}

pub enum Failure {
    Spectral(String),
    Error(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::SpectralCondition { .. } => Failure::Spectral(e.to_string()),
            e => Failure::Error(e.to_string()),
        }
    }
}

macro_rules! plain_failure {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::Error(e.to_string())
            }
        }
    )*};
}
plain_failure!(
    std::io::Error,
    csv::Error,
    serde_json::Error,
    rayon::ThreadPoolBuildError
);

fn effective_config(flags: &Flags, matrix: Option<&PathBuf>) -> Result<RunConfig, Failure> {
    let mut cfg = match &flags.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = flags.seed {
        cfg.seed = v;
    }
    if let Some(v) = flags.format {
        cfg.format = v;
    }
    if flags.workers.is_some() {
        cfg.workers = flags.workers;
    }
    if flags.gamma.is_some() {
        cfg.gamma = flags.gamma;
    }
    if flags.spin_dim.is_some() {
        cfg.spin_dimension = flags.spin_dim;
    }
    if flags.c.is_some() {
        cfg.c = flags.c;
    }
    if let Some(p) = matrix {
        cfg.model = Some(ModelSpec::File {
            path: p.display().to_string(),
        });
    }
    // Flag, then config file, then environment.
    cfg.out = flags.out.clone().or(cfg.out).or_else(|| {
        std::env::var_os(OUT_DIR_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
    });
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool, Failure> {
    let matrix = match &cli.command {
        Command::Certify { matrix }
        | Command::Renormalize { matrix }
        | Command::Oracle { matrix } => matrix.as_ref(),
        _ => None,
    };
    let cfg = effective_config(&cli.flags, matrix)?;
    if let Some(w) = cfg.workers {
        if w == 0 {
            return Err(Failure::Error("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()?;
    }
    let report = match cli.command {
        Command::Certify { .. } => commands::certify(&cfg)?,
        Command::Renormalize { .. } => commands::renormalize(&cfg)?,
        Command::SpinStudy => commands::spin_study(&cfg)?,
        Command::Simulate => commands::simulate(&cfg)?,
        Command::Oracle { .. } => commands::oracle(&cfg)?,
        Command::GoeSweep => commands::goe_sweep(&cfg)?,
    };
    output::emit(&report, &cfg)?;
    Ok(report.certified)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(Failure::Spectral(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Error(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
