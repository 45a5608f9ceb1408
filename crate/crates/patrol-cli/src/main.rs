//! `patrol`: plan and evaluate multi-officer patrol routes driven by
//! short-interval crime-hotspot prediction.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use patrol_core::optimize::Planner;

#[derive(Parser)]
#[command(
    name = "patrol",
    version,
    about = "Plan and simulate multi-officer patrol routes from crime, check-in and 911-call data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Override the config's top-level seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic scenario CSVs.
    Generate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Train the hotspot predictor and export the hotspot map plus metrics.
    Predict {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run a single simulation cell and export events.csv.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Planner name (defaults to the first configured planner).
        #[arg(long)]
        planner: Option<String>,
        /// Officer count (defaults to the first configured count).
        #[arg(long)]
        officers: Option<u32>,
        /// Run index within the sweep cell.
        #[arg(long, default_value_t = 0)]
        run: u32,
    },
    /// Run the full planner x officer-count x runs sweep.
    Benchmark {
        #[command(flatten)]
        common: CommonArgs,
        /// Worker threads for sweep cells (0 = library default).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
}

enum CliError {
    /// Configuration or usage violations; exit code 2.
    Config(String),
    /// Everything else; exit code 1.
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

fn load_config(common: &CommonArgs) -> Result<config::RunConfig, CliError> {
    let mut cfg = config::load(&common.config).map_err(CliError::Config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate { common } => {
            let cfg = load_config(&common)?;
            if cfg.synthetic.is_none() {
                return Err(CliError::Config("generate requires a [synthetic] section".into()));
            }
            commands::cmd_generate(&cfg, &common.out)?;
        }
        Command::Predict { common } => {
            let cfg = load_config(&common)?;
            commands::cmd_predict(&cfg, &common.out)?;
        }
        Command::Simulate { common, planner, officers, run } => {
            let cfg = load_config(&common)?;
            let planner = match planner {
                Some(name) => name.parse::<Planner>().map_err(CliError::Config)?,
                None => cfg.planners[0],
            };
            let officers = officers.unwrap_or(cfg.officer_counts[0]);
            if officers == 0 {
                return Err(CliError::Config("--officers must be positive".into()));
            }
            commands::cmd_simulate(&cfg, &common.out, planner, officers, run)?;
        }
        Command::Benchmark { common, jobs } => {
            let cfg = load_config(&common)?;
            commands::cmd_benchmark(&cfg, &common.out, jobs)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(message)) => {
            eprintln!("configuration error: {message}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(error)) => {
            eprintln!("error: {error:#}");
            ExitCode::from(1)
        }
    }
}
