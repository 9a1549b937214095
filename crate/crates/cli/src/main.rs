//! `modopt`: batch driver for pricing, data generation, feature engineering,
//! training, tuning and evaluation.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use modopt_core::pricing::BOP_STEPS;
use modopt_core::tuning::Strategy;
use modopt_core::zoo::Arch;

use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

#[derive(Parser)]
#[command(name = "modopt", version, about = "American call pricing with classical and modular neural models")]
struct Cli {
    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum PricerModel {
    /// Barone-Adesi-Whaley approximation.
    Baw,
    /// CRR binomial lattice, American exercise.
    Bop,
    /// Black-Scholes, European.
    Bs,
}

#[derive(Clone, Copy, ValueEnum)]
enum ArchArg {
    Mnn,
    Fnn,
}

impl From<ArchArg> for Arch {
    fn from(a: ArchArg) -> Self {
        match a {
            ArchArg::Mnn => Arch::Mnn,
            ArchArg::Fnn => Arch::Fnn,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Random,
    Grid,
    Greedy,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Random => Strategy::Random,
            StrategyArg::Grid => Strategy::Grid,
            StrategyArg::Greedy => Strategy::Greedy,
        }
    }
}

#[derive(Args)]
pub struct PriceArgs {
    #[arg(long, value_enum)]
    model: PricerModel,
    #[arg(long, allow_negative_numbers = true)]
    spot: f64,
    #[arg(long, allow_negative_numbers = true)]
    strike: f64,
    /// Continuously compounded annual rate.
    #[arg(long, allow_negative_numbers = true)]
    rate: f64,
    /// Continuous annual dividend yield.
    #[arg(long, allow_negative_numbers = true)]
    div_yield: f64,
    /// Annualized volatility.
    #[arg(long, allow_negative_numbers = true)]
    vol: f64,
    /// Calendar days to expiry.
    #[arg(long, allow_negative_numbers = true)]
    dte: f64,
    /// Lattice steps for `bop`.
    #[arg(long, default_value_t = BOP_STEPS)]
    steps: usize,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Price one call with a classical model.
    Price(PriceArgs),
    /// Write a synthetic dataset as raw CSVs plus a manifest.
    Generate(Common),
    /// Engineer features from the configured data and write features.csv.
    Features(Common),
    /// Train one network and write its model file and loss history.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        arch: ArchArg,
        /// Use the published best configuration.
        #[arg(long, conflicts_with = "spec")]
        paper_best: bool,
        /// Model spec JSON, e.g. the best spec written by `tune`.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Search the hyper-parameter space and write the trial log and best spec.
    Tune {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        arch: ArchArg,
        /// Number of trials (default 20).
        #[arg(long)]
        budget: Option<u64>,
        /// Search strategy (default random).
        #[arg(long, value_enum)]
        strategy: Option<StrategyArg>,
        /// Concurrent trials.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Compare MNN, B-AW, BOP and FNN on the test split.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        mnn_model: PathBuf,
        #[arg(long)]
        fnn_model: PathBuf,
        /// Dataset name for the report (defaults to the data source name).
        #[arg(long)]
        dataset: Option<String>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Price(args) => commands::price(&args),
        Command::Generate(c) => {
            let cfg = RunConfig::load(c.config.as_deref())?;
            let seed = cfg.seed(c.seed)?;
            commands::generate(&cfg, seed, &cfg.output_dir(c.out_dir.as_deref())?)
        }
        Command::Features(c) => {
            let cfg = RunConfig::load(c.config.as_deref())?;
            commands::features(&cfg, c.seed, &cfg.output_dir(c.out_dir.as_deref())?)
        }
        Command::Train {
            common: c,
            arch,
            paper_best,
            spec,
        } => {
            if !paper_best && spec.is_none() {
                return Err(CliError::Usage("choose a model: --paper-best or --spec <file>".into()));
            }
            let cfg = RunConfig::load(c.config.as_deref())?;
            let seed = cfg.seed(c.seed)?;
            let out = cfg.output_dir(c.out_dir.as_deref())?;
            commands::train(&cfg, arch.into(), spec.as_deref(), seed, &out)
        }
        Command::Tune {
            common: c,
            arch,
            budget,
            strategy,
            workers,
        } => {
            let cfg = RunConfig::load(c.config.as_deref())?;
            let args = commands::TuneArgs {
                arch: arch.into(),
                budget,
                strategy: strategy.map(Into::into),
                workers,
                seed: cfg.seed(c.seed)?,
                out_dir: cfg.output_dir(c.out_dir.as_deref())?,
            };
            commands::tune(&cfg, &args)
        }
        Command::Evaluate {
            common: c,
            mnn_model,
            fnn_model,
            dataset,
        } => {
            let cfg = RunConfig::load(c.config.as_deref())?;
            let out = cfg.output_dir(c.out_dir.as_deref())?;
            commands::evaluate(&cfg, &mnn_model, &fnn_model, c.seed, dataset.as_deref(), &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("run `modopt --help` for usage");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
