use std::path::PathBuf;
use std::process::ExitCode;

use cgle_cli::{exit_code, run_command, Command, Options, RunConfig};
use clap::{Parser, Subcommand};

/// Backstepping kernels, closed-loop simulation and verification for the
/// linearized complex Ginzburg-Landau equation.
#[derive(Debug, Parser)]
#[command(name = "cgle", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Run configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides `[output] dir`).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Kernel CSV to use instead of solving (its metadata sits next to it as `.json`).
    #[arg(long, global = true)]
    kernel_file: Option<PathBuf>,

    /// Seed for the random probe states of the composition check.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Treat warnings as errors.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Solve the forward and inverse kernels and audit their series.
    Kernel,
    /// Simulate with a kernel file, or solve the kernel first.
    Simulate,
    /// Run the oracles on existing outputs.
    Verify,
    /// Kernels, simulation and all oracles.
    Run,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path),
        None => {
            eprintln!("error: --config <path> is required");
            return ExitCode::from(2);
        }
    };
    let cfg = match cfg {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let command = match cli.command {
        Cmd::Kernel => Command::Kernel,
        Cmd::Simulate => Command::Simulate,
        Cmd::Verify => Command::Verify,
        Cmd::Run => Command::Run,
    };
    let opts = Options {
        out_dir: cli.out_dir,
        kernel_file: cli.kernel_file,
        seed: cli.seed,
        strict: cli.strict,
    };
    let summary = run_command(&cfg, command, &opts);
    if let Some(err) = &summary.error {
        eprintln!("error: {err}");
    }
    for check in summary.checks.iter().filter(|c| !c.passed) {
        eprintln!("check failed: {} = {:?} ({:?} {})", check.name, check.value, check.bound, check.threshold);
    }
    ExitCode::from(exit_code(&summary) as u8)
}
