//! `rdbound`: sharp and fuzzy regression-discontinuity estimation with one
//! and two running variables, from CSV data or a seeded synthetic
//! generator.
//!
//! Exit codes: 0 success, 1 config error, 2 data error, 3 estimation
//! error.

mod config;
mod csvio;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{EstimatorSel, KindSel, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("estimation error: {0}")]
    Estimation(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Estimation(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(name = "rdbound", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the selected estimators and write artifacts
    Estimate(EstimateArgs),
    /// Generate a synthetic dataset and write it as CSV
    Simulate(SimulateArgs),
    /// Quick internal consistency checks
    Selftest,
}

#[derive(Args)]
struct EstimateArgs {
    /// TOML run configuration
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides [output].dir)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated estimator list (overrides [estimators].run)
    #[arg(long)]
    estimators: Option<String>,
    /// sharp | fuzzy | both
    #[arg(long)]
    kind: Option<String>,
    /// Moving-window fraction in (0, 0.5]
    #[arg(long)]
    fraction: Option<f64>,
    /// triangular | uniform | epanechnikov
    #[arg(long)]
    kernel: Option<String>,
    /// Seed override for generator-driven runs
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML run configuration with a [dgp] block
    #[arg(long)]
    config: PathBuf,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
    /// Seed override
    #[arg(long)]
    seed: Option<u64>,
    /// Sample-size override
    #[arg(long)]
    n: Option<usize>,
}

fn read_config(path: &PathBuf) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("read {}: {e}", path.display())))?;
    RunConfig::from_toml(&text)
}

fn parse_kind(name: &str) -> Result<KindSel, CliError> {
    match name {
        "sharp" => Ok(KindSel::Sharp),
        "fuzzy" => Ok(KindSel::Fuzzy),
        "both" => Ok(KindSel::Both),
        other => Err(CliError::Config(format!("unknown kind `{other}`"))),
    }
}

fn parse_kernel(name: &str) -> Result<rdbound::KernelKind, CliError> {
    match name {
        "triangular" => Ok(rdbound::KernelKind::Triangular),
        "uniform" => Ok(rdbound::KernelKind::Uniform),
        "epanechnikov" => Ok(rdbound::KernelKind::Epanechnikov),
        other => Err(CliError::Config(format!("unknown kernel `{other}`"))),
    }
}

fn estimate(args: EstimateArgs) -> Result<(), CliError> {
    let mut cfg = read_config(&args.config)?;
    if let Some(list) = &args.estimators {
        let parsed: Result<Vec<EstimatorSel>, CliError> =
            list.split(',').map(|s| EstimatorSel::parse(s.trim())).collect();
        cfg.estimators.run = parsed?;
    }
    if let Some(kind) = &args.kind {
        cfg.estimators.kind = parse_kind(kind)?;
    }
    if let Some(fraction) = args.fraction {
        cfg.estimators.fraction = fraction;
    }
    if let Some(kernel) = &args.kernel {
        cfg.estimators.kernel = parse_kernel(kernel)?;
    }
    if let Some(seed) = args.seed {
        match cfg.dgp.as_mut() {
            Some(d) => d.seed = seed,
            None => return Err(CliError::Config("--seed applies to [dgp] runs only".into())),
        }
    }
    cfg.validate()?;

    let out_dir = args
        .out
        .or_else(|| cfg.output.as_ref().map(|o| o.dir.clone()))
        .ok_or_else(|| CliError::Config("no output directory ([output].dir or --out)".into()))?;
    let result = run::execute(&cfg, &out_dir)?;
    println!(
        "wrote {} estimate record(s) and artifacts to {}",
        result.estimate_rows,
        result.out_dir.display()
    );
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let mut cfg = read_config(&args.config)?;
    if let Some(d) = cfg.dgp.as_mut() {
        if let Some(seed) = args.seed {
            d.seed = seed;
        }
        if let Some(n) = args.n {
            d.n = n;
        }
    }
    let n = run::simulate(&cfg, &args.out)?;
    println!("wrote {n} observations to {}", args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Estimate(args) => estimate(args),
        Command::Simulate(args) => simulate(args),
        Command::Selftest => run::selftest(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
