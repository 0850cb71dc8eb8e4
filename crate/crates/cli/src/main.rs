//! `skg`: simulations, capacity formulas, bounds and the power-allocation optimizer.

mod config;
mod error;
mod output;
mod run;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use config::{ExperimentConfig, Kind, Params};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "skg", version, about = "Group secret-key generation over state-dependent broadcast channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment document; inline flags override its parameters.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// CSV output path; the sidecar goes to `<out>.json`. Standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(flatten)]
    params: Params,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Erasure broadcast protocol, one row per trial.
    ErasureSim,
    /// Layered protocol over a nested deterministic channel.
    DetSim,
    /// Key capacity of a nested deterministic channel by three formulas.
    DetCapacity,
    /// Optimal layer powers for the Gaussian channel.
    GaussOptimize,
    /// Achievable rate and upper bound for the Gaussian channel.
    GaussBounds,
    /// High-SNR degrees of freedom.
    Dof,
    /// Three-state sweep over the middle gain.
    Example1,
    /// Four-state surface over the two middle gains.
    Example2,
    /// Power fractions of the 36-state profile.
    Example3,
    /// Checks a configuration without running it.
    Validate {
        /// Kind to validate against; defaults to the one in the config file.
        kind: Option<Kind>,
    },
}

impl Command {
    fn kind(&self) -> Option<Kind> {
        Some(match self {
            Command::ErasureSim => Kind::ErasureSim,
            Command::DetSim => Kind::DetSim,
            Command::DetCapacity => Kind::DetCapacity,
            Command::GaussOptimize => Kind::GaussOptimize,
            Command::GaussBounds => Kind::GaussBounds,
            Command::Dof => Kind::Dof,
            Command::Example1 => Kind::Example1,
            Command::Example2 => Kind::Example2,
            Command::Example3 => Kind::Example3,
            Command::Validate { kind } => return *kind,
        })
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config = config::resolve(cli.config.as_deref(), cli.command.kind(), &cli.params)?;
    let diagnostics = config::validate(&config);
    if let Command::Validate { .. } = cli.command {
        let report = json!({"kind": config.kind, "diagnostics": diagnostics});
        println!("{report}");
        return Ok(());
    }
    if !diagnostics.is_empty() {
        return Err(CliError::Config(diagnostics));
    }
    execute(&config, cli.out.as_deref())
}

fn execute(config: &ExperimentConfig, out: Option<&std::path::Path>) -> Result<(), CliError> {
    let start = Instant::now();
    let artifact = run::execute(config)?;
    let wall = start.elapsed().as_secs_f64();
    let seed = config.parameters.seed.unwrap_or(0);
    match out {
        Some(path) => output::write_files(&artifact, config, seed, wall, path),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            artifact.write_csv(&mut lock)?;
            lock.flush()?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version.
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Config(vec![e.kind().to_string(), e.to_string().trim().to_string()]);
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
