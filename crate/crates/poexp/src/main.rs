use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use poexp::{cmd_dist, cmd_market, cmd_mean, cmd_simulate, CliError, RunOptions, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "poexp",
    version,
    about = "PoExp laws, two-pattern jump processes and their market model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Survivor, density, joint laws and moments of one PoExp law
    Dist(Args),
    /// Simulate paths: event log and mean/SE summary
    Simulate(Args),
    /// Mean equations against Monte Carlo
    Mean(Args),
    /// Arbitrage check and Esscher measure verification
    Market(Args),
}

#[derive(clap::Args)]
struct Args {
    /// Scenario file (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Output directory
    #[arg(long, env = "POEXP_OUT_DIR", default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    /// Worker threads (results do not depend on it)
    #[arg(long)]
    threads: Option<usize>,
}

type Handler = fn(ScenarioConfig, &RunOptions) -> Result<String, CliError>;

fn run(cli: Cli) -> Result<String, CliError> {
    let (args, f): (Args, Handler) = match cli.command {
        Command::Dist(a) => (a, cmd_dist),
        Command::Simulate(a) => (a, cmd_simulate),
        Command::Mean(a) => (a, cmd_mean),
        Command::Market(a) => (a, cmd_market),
    };
    let cfg = ScenarioConfig::load(&args.config)?;
    let opts = RunOptions {
        out: args.out,
        seed: args.seed,
        paths: args.paths,
        horizon: args.horizon,
        step: args.step,
        threads: args.threads,
    };
    f(cfg, &opts)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("poexp: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
