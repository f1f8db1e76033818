use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fwpath_cli::acceptance::SuiteOptions;
use fwpath_cli::commands::{execute, report};
use fwpath_cli::output::write_json;
use fwpath_cli::{CliError, Command, RunConfig};

#[derive(Parser)]
#[command(name = "fwpath", version, about = "Optimal escape paths, drift-norm maps and escape simulations")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides `langevin.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Shoot an instanton fan, detect crossings, compare with the closed form.
    Instanton(Common),
    /// Map the drift norm and classify its extrema.
    NormMap(Common),
    /// Track the on-axis stationary point of the Maier-Stein norm in alpha.
    Bifurcation(Common),
    /// Simulate escape events.
    Langevin(Common),
    /// Check a D = 0 macrospin fan against the closed-form instanton.
    OracleCheck(Common),
    /// Run the acceptance suite.
    Report {
        #[command(flatten)]
        common: Common,
        /// Run only these criteria (e.g. --only 1 --only 10a).
        #[arg(long)]
        only: Vec<String>,
        /// Override a named tolerance, `name=value` (test mode).
        #[arg(long = "inject-tolerance", value_name = "NAME=VALUE")]
        inject: Vec<String>,
    },
}

fn load(common: &Common, command: Command) -> Result<(RunConfig, PathBuf), CliError> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None if command == Command::Report => RunConfig::new(command),
        None => return Err(CliError::Validation("--config is required".into())),
    };
    if let Some(seed) = common.seed {
        if let Some(l) = cfg.langevin.as_mut() {
            l.seed = seed;
        }
    }
    let out = common
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| CliError::Validation("no output directory (use --out or `output`)".into()))?;
    Ok((cfg.resolve(command)?, out))
}

fn set_threads(n: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = n {
        if n == 0 {
            return Err(CliError::Validation("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (common, command) = match &cli.command {
        Cmd::Instanton(c) => (c, Command::Instanton),
        Cmd::NormMap(c) => (c, Command::NormMap),
        Cmd::Bifurcation(c) => (c, Command::Bifurcation),
        Cmd::Langevin(c) => (c, Command::Langevin),
        Cmd::OracleCheck(c) => (c, Command::OracleCheck),
        Cmd::Report { common, .. } => (common, Command::Report),
    };
    let mut out = common.out.clone();
    let result = set_threads(common.threads).and_then(|_| {
        let (cfg, dir) = load(common, command)?;
        out = Some(dir.clone());
        match &cli.command {
            Cmd::Report { only, inject, .. } => {
                let options = SuiteOptions::default().with_only(only)?.with_injections(inject)?;
                std::fs::create_dir_all(&dir)?;
                let outcome = report(&dir, &options)?;
                if outcome.failures.is_empty() {
                    Ok(())
                } else {
                    Err(CliError::Criteria(outcome.failures))
                }
            }
            _ => execute(&cfg, &dir).map(|_| ()),
        }
    });
    if let (Err(e), Some(dir)) = (&result, &out) {
        if std::fs::create_dir_all(dir).is_ok() {
            write_error(dir, e);
        }
    }
    result
}

fn write_error(out: &Path, e: &CliError) {
    let _ = write_json(&out.join("error.json"), e.record());
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
