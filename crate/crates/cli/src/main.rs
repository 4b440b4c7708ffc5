use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use survcash::cashflow::TailDirection;

mod commands;
mod manifest;

/// Survival-based pricing and risk assessment of lease pools.
#[derive(Debug, Parser)]
#[command(name = "survcash", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate monthly termination hazards from a lease-level portfolio.
    Fit(FitArgs),
    /// Closed-form APV, variance and CTE of the active leases.
    Price(PriceArgs),
    /// Monte Carlo cash-flow bands and the simulated APV distribution.
    Simulate(SimulateArgs),
    /// Run a validation study; exits 3 if any tolerance fails.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
struct WindowArgs {
    /// Minimum age at which a lease can join the pool.
    #[arg(long)]
    delta: u32,
    /// Number of origination months.
    #[arg(long)]
    m: u32,
    /// Maximum lease lifetime in months.
    #[arg(long)]
    omega: u32,
    /// Valuation month (last month of observed performance data).
    #[arg(long)]
    epsilon: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TailOption {
    Geometric,
    None,
}

#[derive(Debug, Args)]
struct FitArgs {
    portfolio: PathBuf,
    #[command(flatten)]
    window: WindowArgs,
    /// Keep only leases with this scheduled term.
    #[arg(long)]
    scheduled_term: Option<u32>,
    /// Replace zero hazards by linear interpolation.
    #[arg(long)]
    interpolate_zeros: bool,
    /// Extend hazards beyond the last observable age.
    #[arg(long, value_enum, default_value_t = TailOption::None)]
    tail: TailOption,
    #[arg(short, long, default_value = "hazard.json")]
    output: PathBuf,
    /// Also estimate and smooth the depreciation curve into this CSV.
    #[arg(long)]
    curve_out: Option<PathBuf>,
    /// Smoother span used with --curve-out.
    #[arg(long, default_value_t = 0.75)]
    span: f64,
}

#[derive(Debug, Args)]
struct PricingInputs {
    hazard: PathBuf,
    portfolio: PathBuf,
    curve: PathBuf,
    /// Keep only leases with this scheduled term.
    #[arg(long)]
    scheduled_term: Option<u32>,
    /// Monthly discount rate.
    #[arg(long)]
    rate: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = TailDirection::Upper)]
    tail_direction: TailDirection,
}

#[derive(Debug, Args)]
struct PriceArgs {
    #[command(flatten)]
    inputs: PricingInputs,
    #[arg(short, long, default_value = "report.json")]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    inputs: PricingInputs,
    #[arg(long, default_value_t = 1000)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Months of projected cash flow in the band file.
    #[arg(long, default_value_t = 24)]
    horizon: u32,
    /// Redraw the hazard vector from its asymptotic distribution each replicate.
    #[arg(long)]
    random_hazard: bool,
    #[arg(long, default_value = "bands.csv")]
    bands: PathBuf,
    #[arg(long, default_value = "empirics.json")]
    empirics: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Study {
    Theorem1,
    Asymptotics,
    Cte,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long, value_enum)]
    study: Study,
    /// Sample size per replicate (asymptotics study).
    #[arg(long, default_value_t = 30_000)]
    n: usize,
    /// Defaults: theorem1 1,000,000; asymptotics 2,000; cte 100,000.
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long, default_value = "validation.json")]
    output: PathBuf,
    /// Per-age CSV of the asymptotics study (default: output with .csv extension).
    #[arg(long)]
    csv: Option<PathBuf>,
}

enum Outcome {
    Ok,
    ToleranceFailure,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(args) => commands::fit(args).map(|_| Outcome::Ok),
        Command::Price(args) => commands::price(args).map(|_| Outcome::Ok),
        Command::Simulate(args) => commands::simulate(args).map(|_| Outcome::Ok),
        Command::Validate(args) => commands::validate(args),
    };
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::ToleranceFailure) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
