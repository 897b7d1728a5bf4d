//! Command-line front end: seeded runs with CSV or JSON output.

mod commands;
mod config;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::{Command, Format, RunConfig};
use table::Meta;

#[derive(Debug)]
pub enum CliError {
    Invalid(String),
    Numerical(String),
    Io(String),
}

impl From<spde_moments::error::Error> for CliError {
    fn from(e: spde_moments::error::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Invalid(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "spde-moments", version, about = "Moment asymptotics and chaos estimates for fractional SPDEs")]
struct Cli {
    /// What to compute.
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration (optional for `verify`).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Monte Carlo seed; overrides the config.
    #[arg(long, env = "SPDE_MOMENTS_SEED")]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

const EXIT_INVALID: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_ACCEPTANCE: u8 = 4;

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Invalid(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::parse(&text)?
        }
        None if cli.command == Command::Verify => RunConfig::empty(),
        None => return Err(CliError::Invalid(format!("`{}` needs --config", cli.command.name()))),
    };
    if let Some(c) = cfg.command {
        if c != cli.command {
            return Err(CliError::Invalid(format!(
                "config is for `{}` but `{}` was requested",
                c.name(),
                cli.command.name()
            )));
        }
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<Vec<String>, CliError> {
    let cfg = load(cli)?;
    let seed = cli.seed.unwrap_or_else(|| cfg.seed_or_default());
    let mc = cfg.mc.resolve(seed)?;
    let out = match cli.command {
        Command::Classify => commands::classify(&cfg, seed)?,
        Command::Sweep => commands::sweep(&cfg, seed)?,
        Command::Kernel => commands::kernel(&cfg, seed)?,
        Command::Chaos => commands::chaos(&cfg, &mc)?,
        Command::Variational => commands::variational(&cfg, seed)?,
        Command::Asymptotics => commands::asymptotics(&cfg, seed)?,
        Command::Bounds => commands::bounds(&cfg, &mc)?,
        Command::Verify => commands::verify(seed)?,
    };
    let format = cli.format.or(cfg.output.format).unwrap_or_default();
    let meta = Meta { command: cli.command.name(), seed, samples: out.samples };
    let text = out.table.render(format, &meta).map_err(|e| CliError::Io(e.to_string()))?;
    match cli.out.clone().or(cfg.output.path.as_ref().map(PathBuf::from)) {
        Some(path) => {
            std::fs::write(&path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?
        }
        None => print!("{text}"),
    }
    Ok(out.failures)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(failures) if failures.is_empty() => ExitCode::SUCCESS,
        Ok(failures) => {
            for f in failures {
                eprintln!("acceptance failure: {f}");
            }
            ExitCode::from(EXIT_ACCEPTANCE)
        }
        Err(CliError::Invalid(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_INVALID)
        }
        Err(CliError::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(EXIT_NUMERICAL)
        }
        Err(CliError::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::FAILURE
        }
    }
}
