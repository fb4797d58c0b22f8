use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use endfire_cli::commands;
use endfire_cli::config::{self, Overrides, RunConfig};
use endfire_cli::{CliError, Result};

/// Simulate and analyse momentum-resolved superradiance runs.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, value_name = "K")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Run configuration (TOML).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Preset scenario: tau0, tau200, tau500 or raman.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    #[arg(long, value_name = "N")]
    shots: Option<u64>,
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
    /// Run directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Write the packed binary event format.
    #[arg(long)]
    binary: bool,
}

#[derive(Debug, Args)]
struct RunDir {
    /// Run directory written by `simulate`.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize shots and write the event file.
    Simulate(RunArgs),
    /// Build angular and g² histograms from a run's events.
    Analyze {
        #[command(flatten)]
        run: RunDir,
        /// Config to check the events against; defaults to the run's own.
        #[arg(long, value_name = "PATH")]
        config: Option<PathBuf>,
    },
    /// Fit the histograms of an analysed run.
    Fit {
        #[command(flatten)]
        run: RunDir,
        /// Peak-free run used as angular background.
        #[arg(long, value_name = "DIR")]
        reference: Option<PathBuf>,
    },
    /// Simulate, analyse and fit in one go.
    Pipeline {
        #[command(flatten)]
        args: RunArgs,
        #[arg(long, value_name = "DIR")]
        reference: Option<PathBuf>,
    },
    /// Gather analysed runs into one summary and CSV bundle.
    Report {
        /// A run directory or a directory of runs.
        dir: PathBuf,
    },
    /// Check the file formats on a small scratch run.
    Selftest,
}

fn resolve(args: &RunArgs) -> Result<config::Resolved> {
    let cfg = match &args.config {
        Some(path) => config::load(path)?,
        None => RunConfig::default(),
    };
    let over = Overrides {
        preset: args.preset.clone(),
        n_shots: args.shots,
        seed: args.seed,
        out: args.out.clone(),
    };
    let mut resolved = config::resolve(cfg, &over)?;
    if args.binary {
        resolved.format = endfire_cli::events::EventFormat::Binary;
    }
    Ok(resolved)
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(value: impl std::fmt::Display) {
    let _ = write!(std::io::stdout().lock(), "{value}");
}

fn run(cli: Cli) -> Result<()> {
    if let Some(k) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    match cli.command {
        Command::Simulate(args) => emit(commands::simulate(&resolve(&args)?)?),
        Command::Analyze { run, config } => emit(commands::analyze(&run.out, config.as_deref())?),
        Command::Fit { run, reference } => emit(commands::fit(&run.out, reference.as_deref())?),
        Command::Pipeline { args, reference } => {
            let cfg = resolve(&args)?;
            emit(commands::simulate(&cfg)?);
            emit(commands::analyze(&cfg.out, None)?);
            emit(commands::fit(&cfg.out, reference.as_deref())?);
        }
        Command::Report { dir } => emit(commands::report(&dir)?),
        Command::Selftest => {
            commands::selftest()?;
            emit("selftest passed\n");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ENDFIRE_LOG", "info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
