use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use disclose_cli::commands;
use disclose_cli::config::{Overrides, RunConfig};
use disclose_cli::CliError;

/// Optimal dynamic information disclosure: closed-form policies with LP and
/// Monte Carlo verification.
#[derive(Parser)]
#[command(name = "disclose", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Monte Carlo seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory override for CSV emission.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Time-grid size override for the LP oracles.
    #[arg(long)]
    grid: Option<usize>,
    /// Obedience tolerance override.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the optimal policy, its values and the thresholds.
    Solve(CommonArgs),
    /// Run the verification battery (LP oracle, obedience, Monte Carlo).
    Verify(CommonArgs),
    /// Emit principal-value curves over the prior as CSV.
    Sweep(CommonArgs),
    /// Compute the optimal information/wage contract.
    Contract(CommonArgs),
    /// Solve the continuous-quality model (gradual cutoff disclosure).
    Genq(CommonArgs),
}

impl CommonArgs {
    fn load(&self) -> Result<RunConfig, CliError> {
        Ok(RunConfig::load(&self.config)?.apply(&Overrides {
            seed: self.seed,
            out: self.out.clone(),
            grid: self.grid,
            tol: self.tol,
        }))
    }
}

fn emit<T: serde::Serialize>(report: &T) -> Result<(), CliError> {
    println!("{}", serde_json::to_string_pretty(report)?);
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Solve(args) => emit(&commands::cmd_solve(&args.load()?)?),
        Command::Verify(args) => {
            let report = commands::cmd_verify(&args.load()?)?;
            eprint!("{}", report.render_lines());
            emit(&report)?;
            if report.pass {
                Ok(())
            } else {
                Err(CliError::VerificationFailed(
                    "one or more checks failed".into(),
                ))
            }
        }
        Command::Sweep(args) => emit(&commands::cmd_sweep(&args.load()?)?),
        Command::Contract(args) => emit(&commands::cmd_contract(&args.load()?)?),
        Command::Genq(args) => emit(&commands::cmd_genq(&args.load()?)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}
