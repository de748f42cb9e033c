mod commands;
mod config;

use clap::{Parser, Subcommand, ValueEnum};
use config::{Axis, Config, ConfigError};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(
    name = "fastresp",
    version,
    about = "Linear response of hyperbolic maps along one orbit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Write the result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fast linear response for one configuration.
    Run(Common),
    /// Cross-check the fast response against the independent oracles.
    Validate(Common),
    /// Grid of runs along one axis.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        axis: Option<Axis>,
        /// Comma-separated axis values (overrides the config).
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] fastresp::Error),
    #[error("output: {0}")]
    Output(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(fastresp::Error::Io(_)) | CliError::Output(_) => 1,
            CliError::Core(_) => 2,
        }
    }
}

fn load(common: &Common) -> Result<Config, CliError> {
    let mut cfg = Config::load(&common.config)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn emit(common: &Common, body: &str) -> Result<(), CliError> {
    match &common.out {
        Some(path) => std::fs::write(path, body)
            .map_err(|e| CliError::Output(format!("{}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(body.as_bytes())
            .map_err(|e| CliError::Output(e.to_string())),
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let common = match &cli.command {
        Command::Run(c) | Command::Validate(c) => c,
        Command::Sweep { common, .. } => common,
    };
    if let Some(n) = common.threads {
        // Only fails if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let cfg = load(common)?;
    let body = match &cli.command {
        Command::Run(c) => commands::run(&cfg, c.format)?,
        Command::Validate(c) => commands::validate(&cfg, c.format)?,
        Command::Sweep {
            common,
            axis,
            values,
        } => {
            let section = cfg.sweep.clone();
            let axis = axis.or(section.as_ref().map(|s| s.axis)).ok_or_else(|| {
                ConfigError::Value("sweep needs --axis or a `sweep` section".into())
            })?;
            let values = values
                .clone()
                .or_else(|| section.map(|s| s.values).filter(|v| !v.is_empty()))
                .unwrap_or_default();
            commands::sweep(&cfg, axis, &values, common.format)?
        }
    };
    emit(common, &body)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RESPONSE_LOG", "warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
