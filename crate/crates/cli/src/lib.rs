//! Command-line pipeline for the readmission risk model.
//!
//! Each subcommand runs one stage and reads its inputs from the output
//! directory written by earlier stages; `run` executes all of them.

pub mod config;
pub mod error;
pub mod report;
pub mod stages;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::PipelineConfig;
pub use error::{exit, CliError, CliResult};
pub use stages::Context;

#[derive(Debug, Parser)]
#[command(name = "readmit", version, about = "Explainable random-forest pipeline for ICU readmission risk")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Global seed; overrides the configuration file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (default: $READMIT_OUT, then the file, then `readmit_out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Record per-stage wall time in the manifest.
    #[arg(long, global = true)]
    pub record_timings: bool,
    /// Only report errors.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    pub quiet: bool,
    /// More log output; repeat for debug detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Generate synthetic training, blind and external cohorts.
    Synth,
    /// Filter, fit the preprocessor and transform every set.
    Preprocess,
    /// Greedy forward feature selection.
    Select,
    /// Fit the final random forest.
    Train,
    /// Cross-validated and held-out metrics.
    Evaluate,
    /// Calibration curves, slope, intercept and ICI.
    Calibrate,
    /// Positive likelihood-ratio sweep.
    Lr,
    /// Shapley attributions and feature ranking.
    Explain,
    /// Markdown report and artifact manifest.
    Report,
    /// Every stage in order.
    Run,
}

/// Applies command-line overrides to the file configuration.
pub fn resolve_config(cli: &Cli, env_out: Option<PathBuf>) -> CliResult<PipelineConfig> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if cli.seed.is_some() {
        config.seed = cli.seed;
    }
    config.out = cli
        .out
        .clone()
        .or(env_out)
        .or(config.out)
        .or_else(|| Some(PathBuf::from(config::DEFAULT_OUT)));
    Ok(config)
}

/// Runs one command against a prepared context.
pub fn execute(ctx: &Context, command: Command) -> CliResult<()> {
    use stages::timed;
    match command {
        Command::Synth => timed(ctx, "synth", stages::synth),
        Command::Preprocess => timed(ctx, "preprocess", stages::preprocess),
        Command::Select => timed(ctx, "select", stages::select),
        Command::Train => timed(ctx, "train", stages::train),
        Command::Evaluate => timed(ctx, "evaluate", stages::evaluate),
        Command::Calibrate => timed(ctx, "calibrate", stages::calibrate),
        Command::Lr => timed(ctx, "lr", stages::lr),
        Command::Explain => timed(ctx, "explain", stages::explain),
        Command::Report => timed(ctx, "report", report::report),
        Command::Run => {
            if ctx.config.paths.train.is_none() {
                execute(ctx, Command::Synth)?;
            }
            for c in [
                Command::Preprocess,
                Command::Select,
                Command::Train,
                Command::Evaluate,
                Command::Calibrate,
                Command::Lr,
                Command::Explain,
            ] {
                execute(ctx, c)?;
            }
            // the report stage reads timings, so its own time is not recorded
            report::report(ctx)
        }
    }
}

/// Runs `command` on a dedicated thread pool of `threads` workers (all
/// cores when `None`).
pub fn execute_with_threads(ctx: &Context, command: Command, threads: Option<usize>) -> CliResult<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("cannot start thread pool: {e}")))?;
    pool.install(|| execute(ctx, command))
}

fn init_logging(cli: &Cli) {
    let level = if cli.quiet {
        log::LevelFilter::Error
    } else {
        match cli.verbose {
            0 => log::LevelFilter::Warn,
            1 => log::LevelFilter::Info,
            _ => log::LevelFilter::Debug,
        }
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE } else { exit::SUCCESS };
        }
    };
    init_logging(&cli);
    let env_out = std::env::var_os(config::OUT_ENV).map(PathBuf::from);
    let result = resolve_config(&cli, env_out)
        .and_then(|config| Context::new(config, cli.record_timings))
        .and_then(|ctx| execute_with_threads(&ctx, cli.command, cli.threads));
    match result {
        Ok(()) => exit::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
