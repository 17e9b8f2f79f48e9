use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod report;

use config::{ConfigError, ExperimentConfig};

/// Batch runner for jointly controlled lottery experiments.
#[derive(Parser, Debug)]
#[command(name = "jcl", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Root seed; overrides the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of runs; overrides the config.
    #[arg(long)]
    pub runs: Option<u64>,
    /// Output file. CSV commands also write a JSON report next to it.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Exit with status 3 when the acceptance gate fails.
    #[arg(long)]
    pub assert: bool,
    /// Accuracy target; overrides the config.
    #[arg(long)]
    pub eps: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Bounded lottery runs.
    LotteryStrong {
        #[command(flatten)]
        common: Common,
    },
    /// Unbounded lottery runs.
    LotteryWeak {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        max_stages: Option<u64>,
    },
    /// Unbounded lottery runs with a faulty device, scored by the detector.
    Detect {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        max_stages: Option<u64>,
    },
    /// Threshold calibration for the bounded lottery.
    Calibrate {
        #[command(flatten)]
        common: Common,
    },
    /// Block profile of a quitting game.
    Game {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = GameMode::Payoff)]
        mode: GameMode,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum GameMode {
    Payoff,
    Deviations,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("acceptance gate failed: {0}")]
    Gate(String),
    #[error(transparent)]
    Report(#[from] report::ReportError),
    #[error(transparent)]
    Run(#[from] jcl_core::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Gate(_) => 3,
            CliError::Report(_) | CliError::Run(_) => 1,
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let common = match &cli.command {
        Command::LotteryStrong { common }
        | Command::LotteryWeak { common, .. }
        | Command::Detect { common, .. }
        | Command::Calibrate { common }
        | Command::Game { common, .. } => common.clone(),
    };
    let cfg = ExperimentConfig::load(&common.config)?;
    jcl_core::exec::with_jobs(common.jobs, move || match cli.command {
        Command::LotteryStrong { common } => commands::lottery_strong(&cfg, &common),
        Command::LotteryWeak { common, max_stages } => commands::lottery_weak(&cfg, &common, max_stages, false),
        Command::Detect { common, max_stages } => commands::lottery_weak(&cfg, &common, max_stages, true),
        Command::Calibrate { common } => commands::calibrate(&cfg, &common),
        Command::Game { common, mode } => commands::game(&cfg, &common, mode),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("JCL_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("jcl: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
