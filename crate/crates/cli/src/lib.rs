//! Command-line pipeline: simulate, measure, spillover, features, fit, forecast, evaluate.

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::PipelineConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "volspill", version, about = "Quantile spillover volatility forecasting pipeline")]
pub struct Cli {
    /// Pipeline configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides VOLSPILL_OUTPUT_DIR and the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; overrides VOLSPILL_THREADS and the config.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Generate synthetic ticks from the `simulate` section.
    Simulate,
    /// Daily realized measures from tick data.
    Measures,
    /// TVP-QVAR spillover tables per measure.
    Spillover,
    /// State-adaptive spillover features.
    Features,
    /// In-sample HAR and GARCH fits.
    Fit,
    /// Out-of-sample forecasts.
    Forecast,
    /// Losses, model confidence sets and out-of-sample R^2.
    Evaluate,
    /// Every stage in order.
    RunAll,
}

/// Config file with flag and environment overrides applied.
pub fn resolve_config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::User("--config <FILE> is required".into()))?;
    let mut cfg = PipelineConfig::load(path)?;
    if let Some(dir) = std::env::var_os(config::OUTPUT_ENV).filter(|v| !v.is_empty()) {
        cfg.output_dir = dir.into();
    }
    if let Some(t) = std::env::var(config::THREADS_ENV).ok().filter(|v| !v.is_empty()) {
        let n = t
            .parse()
            .map_err(|_| CliError::User(format!("{}: `{t}` is not a thread count", config::THREADS_ENV)))?;
        cfg.threads = Some(n);
    }
    if let Some(dir) = &cli.out {
        cfg.output_dir = dir.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve_config(cli)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads {
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Simulate => commands::cmd_simulate(&cfg),
        Command::Measures => commands::cmd_measures(&cfg),
        Command::Spillover => commands::cmd_spillover(&cfg),
        Command::Features => commands::cmd_features(&cfg),
        Command::Fit => commands::cmd_fit(&cfg),
        Command::Forecast => commands::cmd_forecast(&cfg),
        Command::Evaluate => commands::cmd_evaluate(&cfg),
        Command::RunAll => commands::cmd_run_all(&cfg),
    })
}
