use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ddkf_cli::commands::{benchmark_cmd, build_cmd, estimate_innovations_cmd, predict_cmd};
use ddkf_cli::config::RunConfig;
use ddkf_cli::{CliError, CliResult};

/// Data-driven Kalman prediction from input-output data.
#[derive(Debug, Parser)]
#[command(name = "ddkf", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Overrides the configured master seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads for Monte Carlo runs (default: all cores).
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate innovations and their covariance from a u/y record.
    EstimateInnovations(Common),
    /// Build the signal matrix model, its state-space form and Kalman predictor.
    Build(Common),
    /// Predict future outputs from a built model, a past record and future inputs.
    Predict(Common),
    /// Run the aircraft Monte Carlo study.
    Benchmark(Common),
}

fn execute(command: &Command) -> CliResult<PathBuf> {
    let (name, common) = match command {
        Command::EstimateInnovations(c) => ("estimate_innovations", c),
        Command::Build(c) => ("build", c),
        Command::Predict(c) => ("predict", c),
        Command::Benchmark(c) => ("benchmark", c),
    };
    let config = RunConfig::load(&common.config)?;
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(CliError::Schema("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Schema(format!("thread pool: {e}")))?;
    }
    if common.seed.is_some() && name != "benchmark" {
        log::info!("--seed has no effect on {name}: it draws no random numbers");
    }
    let out: &Path = &common.out;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    match command {
        Command::EstimateInnovations(_) => {
            estimate_innovations_cmd(RunConfig::section(&config.estimate_innovations, name)?, out)
        }
        Command::Build(_) => build_cmd(RunConfig::section(&config.build, name)?, out),
        Command::Predict(_) => predict_cmd(RunConfig::section(&config.predict, name)?, out),
        Command::Benchmark(_) => benchmark_cmd(RunConfig::section(&config.benchmark, name)?, common.seed, out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DDKF_LOG", "warn")).init();
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(path) => {
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            log::error!("{e}");
            eprintln!("{}", e.report());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
