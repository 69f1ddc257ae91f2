//! `momentmp`: run predictive resampling experiments from JSON configs.

mod config;
mod data;
mod error;
mod logistic;
mod output;
mod univariate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{LogisticConfig, SelectConfig, SimulateConfig};
use crate::error::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(name = "momentmp", version, about = "Moment martingale posterior experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON configuration; flags take precedence over its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Posterior replicates `B`.
    #[arg(long, global = true)]
    replicates: Option<usize>,

    /// Final effective sample size `N`.
    #[arg(long, global = true)]
    horizon: Option<usize>,

    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw posterior functionals for a univariate sample.
    Simulate(UnivariateArgs),
    /// Choose `c` by energy-score cross-validation.
    SelectC(SelectArgs),
    /// Logistic regression posterior, score curves and hold-out tables.
    Logistic(LogisticArgs),
    /// Record univariate moment paths only.
    Paths(UnivariateArgs),
}

#[derive(Args, Debug)]
struct UnivariateArgs {
    /// Sample size for generated data.
    #[arg(long)]
    n: Option<usize>,
    /// Fixed concentration, `inf` allowed.
    #[arg(long)]
    c: Option<String>,
    #[arg(long)]
    path_stride: Option<usize>,
}

#[derive(Args, Debug)]
struct SelectArgs {
    #[arg(long)]
    n: Option<usize>,
    /// Independent generated datasets.
    #[arg(long)]
    datasets: Option<usize>,
}

#[derive(Args, Debug)]
struct LogisticArgs {
    #[arg(long)]
    c: Option<String>,
    #[arg(long)]
    splits: Option<usize>,
}

fn reject(flag: &str, command: &str) -> CliError {
    CliError::Config(format!("--{flag} does not apply to {command}"))
}

fn simulate_config(cli: &Cli, args: &UnivariateArgs) -> CliResult<SimulateConfig> {
    let mut cfg: SimulateConfig = config::load(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(b) = cli.replicates {
        cfg.replicates = b;
    }
    if cli.horizon.is_some() {
        cfg.horizon = cli.horizon;
    }
    if args.n.is_some() {
        cfg.data.n = args.n;
    }
    if args.c.is_some() {
        cfg.c = args.c.clone();
    }
    if args.path_stride.is_some() {
        cfg.path_stride = args.path_stride;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> CliResult<()> {
    let out = cli.out_dir.as_path();
    match &cli.command {
        Command::Simulate(args) => univariate::simulate(&simulate_config(cli, args)?, out, false),
        Command::Paths(args) => univariate::simulate(&simulate_config(cli, args)?, out, true),
        Command::SelectC(args) => {
            if cli.replicates.is_some() {
                return Err(reject("replicates", "select-c"));
            }
            if cli.horizon.is_some() {
                return Err(reject("horizon", "select-c"));
            }
            let mut cfg: SelectConfig = config::load(cli.config.as_deref())?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if args.n.is_some() {
                cfg.data.n = args.n;
            }
            if let Some(d) = args.datasets {
                cfg.datasets = d;
            }
            univariate::select(&cfg, out)
        }
        Command::Logistic(args) => {
            let mut cfg: LogisticConfig = config::load(cli.config.as_deref())?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if let Some(b) = cli.replicates {
                cfg.replicates = b;
            }
            if cli.horizon.is_some() {
                cfg.horizon = cli.horizon;
            }
            if args.c.is_some() {
                cfg.c = args.c.clone();
            }
            if let Some(s) = args.splits {
                cfg.splits = s;
            }
            logistic::run(&cfg, out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
