use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

mod commands;
mod output;

#[derive(Parser)]
#[command(name = "logguard", version, about = "Synthetic access logs, RL anomaly detectors and their comparison")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration; defaults apply to anything it leaves out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic access log.
    Generate(GenerateArgs),
    /// Train one agent and write its episode log, policy and summary.
    Train(TrainArgs),
    /// Train every configured agent over several runs and test the differences.
    Compare(CompareArgs),
    /// Sweep initial temperature and curiosity weight for LogGuardQ.
    Sensitivity(SensitivityArgs),
    /// Render a markdown and SVG report from comparison outputs.
    Report(ReportArgs),
    /// Print the resolved configuration as TOML.
    Config(ConfigArgs),
}

#[derive(Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    entries: Option<usize>,
    #[arg(long)]
    anomaly_rate: Option<f64>,
    #[arg(long)]
    chunk_size: Option<usize>,
    /// Output directory (default: <output_dir>/data).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// logguardq, dqn or ppo.
    #[arg(long)]
    agent: String,
    /// Dataset directory written by `generate` (default: <output_dir>/data).
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    episodes: Option<usize>,
    /// Run index used to derive the seeds.
    #[arg(long, default_value_t = 0)]
    run: usize,
    /// Output directory (default: <output_dir>/train/<agent>).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct CompareArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    /// Comma-separated agent kinds.
    #[arg(long, value_delimiter = ',')]
    agents: Option<Vec<String>>,
    /// Compare finished `train` output directories instead of training.
    #[arg(long, num_args = 1..)]
    inputs: Vec<PathBuf>,
    /// Output directory (default: <output_dir>/compare).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SensitivityArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Episodes per grid cell.
    #[arg(long)]
    episodes: Option<usize>,
    /// Points per axis (both axes).
    #[arg(long)]
    grid: Option<usize>,
    /// Output directory (default: <output_dir>/sensitivity).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReportArgs {
    #[command(flatten)]
    common: Common,
    /// Directory written by `compare` (default: <output_dir>/compare).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output directory (default: <input>/report).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ConfigArgs {
    #[command(flatten)]
    common: Common,
}

fn load_config(common: &Common) -> Result<logguard::config::RunConfig> {
    let mut config = match &common.config {
        Some(path) => logguard::config::RunConfig::load(path)
            .with_context(|| format!("loading config {}", path.display()))?,
        None => logguard::config::RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    Ok(config)
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(args) => {
            let config = load_config(&args.common)?;
            commands::generate(config, &args)
        }
        Command::Train(args) => {
            let config = load_config(&args.common)?;
            commands::train(config, &args)
        }
        Command::Compare(args) => {
            let config = load_config(&args.common)?;
            commands::compare(config, &args)
        }
        Command::Sensitivity(args) => {
            let config = load_config(&args.common)?;
            commands::sensitivity(config, &args)
        }
        Command::Report(args) => {
            let config = load_config(&args.common)?;
            commands::report(config, &args)
        }
        Command::Config(args) => {
            let config = load_config(&args.common)?;
            config.validate()?;
            print!("{}", config.to_toml()?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

pub fn parse_agents(names: &[String]) -> Result<Vec<logguard::learner::AgentKind>> {
    if names.is_empty() {
        bail!("no agents given");
    }
    names
        .iter()
        .map(|n| n.trim().parse().map_err(anyhow::Error::from))
        .collect()
}
