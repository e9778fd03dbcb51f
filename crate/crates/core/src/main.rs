use clap::{Parser, Subcommand};
use heftcom_replay::commands;
use heftcom_replay::config::RunConfig;
use heftcom_replay::error::Error;
use heftcom_replay::time::Window;
use std::path::PathBuf;
use std::process::ExitCode;

/// Backtest engine for the HEFTcom 2024 day-ahead forecasting and trading
/// competition archive.
#[derive(Parser)]
#[command(name = "heftcom-replay", version, about)]
struct Cli {
    /// Config file (INI-style sections); command-line flags win over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory holding the archive files.
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    /// Directory to write result tables into.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Replay window as START..END market days, e.g. 2024-02-20..2024-05-19.
    #[arg(long, global = true)]
    window: Option<String>,
    /// Market impact coefficient in GBP/MWh per MWh of imbalance.
    #[arg(long, global = true)]
    k: Option<f64>,
    /// Seed for the stochastic pieces (hybrid aggregation).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Comma-separated team filter; the benchmark team is always kept.
    #[arg(long, global = true)]
    teams: Option<String>,
    /// Score the flagged team without its corrupted forecast period.
    #[arg(long, global = true)]
    sanitize_probprofit: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Forecasting track: pinball scores, reliability, expanding averages.
    Score,
    /// Trading track: revenue, trade statistics, and all trading analytics.
    Trade,
    /// The final three-track leaderboard.
    Leaderboard,
    /// Compare bidding strategies against the median baseline.
    StrategyBacktest,
    /// Load and validate the archive, writing a validation report.
    ValidateData,
}

fn build_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(dir) = &cli.data_dir {
        config.data_dir = dir.clone();
    }
    if let Some(dir) = &cli.out_dir {
        config.out_dir = dir.clone();
    }
    if let Some(window) = &cli.window {
        let (start, end) = window
            .split_once("..")
            .ok_or_else(|| Error::Config(format!("window '{window}' is not START..END")))?;
        let parse = |s: &str| {
            chrono::NaiveDate::parse_from_str(s, "%Y-%m-%d")
                .map_err(|e| Error::Config(format!("bad date '{s}': {e}")))
        };
        let convention = config.window.convention;
        config.window = Window::new(parse(start)?, parse(end)?, convention)?;
    }
    if let Some(k) = cli.k {
        config.k = heftcom_replay::market::MarketImpactCoefficient::new(k)?;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(teams) = &cli.teams {
        config.team_filter = teams
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::to_string)
            .collect();
    }
    if cli.sanitize_probprofit {
        config.sanitize_probprofit = true;
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match build_config(&cli) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let result = match cli.command {
        Command::Score => commands::cmd_score(&config),
        Command::Trade => commands::cmd_trade(&config),
        Command::Leaderboard => commands::cmd_leaderboard(&config),
        Command::StrategyBacktest => commands::cmd_strategy_backtest(&config),
        Command::ValidateData => commands::cmd_validate_data(&config),
    };
    match result {
        Ok(written) => {
            let mut ok = true;
            for path in &written {
                if path.exists() {
                    println!("wrote {}", path.display());
                } else {
                    eprintln!("error: declared output {} is missing", path.display());
                    ok = false;
                }
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
