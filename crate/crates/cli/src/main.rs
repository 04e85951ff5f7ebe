//! `catmap`: perturbative predictions, Monte Carlo measurements and symbolic coding
//! for the perturbed cat map.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use catmap_core::CatError;
use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::config::Config;
use crate::output::Sink;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numeric(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl From<CatError> for CliError {
    fn from(e: CatError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numeric(_) | CliError::Io(_) => 2,
            CliError::Config(_) => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Debug, Parser)]
#[command(name = "catmap", version, about = "Perturbed cat map toolkit")]
struct Cli {
    /// JSON configuration; unknown keys are rejected.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for Monte Carlo (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Perturbative order K.
    #[arg(long, global = true)]
    order: Option<usize>,
    #[arg(long, global = true, value_enum)]
    boundary_terms: Option<Switch>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Conjugation coefficients and conjugacy residuals.
    Coeffs,
    /// SRB cumulants C_n^(m) and means.
    Cumulants,
    /// Large-deviation function ζ(p) from the cumulant table.
    Zeta,
    /// Fluctuation-relation residuals and first violation order.
    Ftcheck,
    /// Monte Carlo runs, ratio curves and slopes.
    Simulate,
    /// A(ε) scan with window-term fits.
    Fit,
    /// Markov partition and symbolic coding.
    Symbolic {
        #[arg(value_enum)]
        verb: commands::Verb,
    },
    /// Perturbative predictions next to Monte Carlo measurements.
    Report,
}

fn effective_config(cli: &Cli) -> Result<Config, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(k) = cli.order {
        cfg.order = k;
    }
    if let Some(b) = cli.boundary_terms {
        cfg.boundary_terms = b == Switch::On;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = effective_config(&cli)?;
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let mut sink = Sink::new(&dir, cfg.hash(), cfg.seed)?;
    sink.json("config.json", &cfg)?;
    match cli.command {
        Command::Coeffs => commands::coeffs(&cfg, &mut sink),
        Command::Cumulants => commands::cumulants(&cfg, &mut sink),
        Command::Zeta => commands::zeta_cmd(&cfg, &mut sink),
        Command::Ftcheck => commands::ftcheck(&cfg, &mut sink),
        Command::Simulate => commands::simulate_cmd(&cfg, &mut sink),
        Command::Fit => commands::fit(&cfg, &mut sink),
        Command::Symbolic { verb } => commands::symbolic(&cfg, verb, &mut sink),
        Command::Report => commands::report(&cfg, &mut sink),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(CliError::Usage(String::new()).code())
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
