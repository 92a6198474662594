//! Batch driver for the rescaled-flow toolkit: scalar-inequality batteries,
//! smoothing-constant estimation, the mild-solution iteration, the direct
//! integrator, and the combined smallness/bound pipeline.
//!
//! Every subcommand reads an optional JSON config (`--config`), falls back
//! to built-in defaults otherwise, writes schema-stamped CSV into `--out`,
//! and prints a one-line summary. Exit codes: 0 on success, 1 when a run
//! executes but the numbers fail their target (no convergence, violated
//! bound, blow-up), 2 for an unusable invocation or config file.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

/// Failures split by exit code: `Usage` is a bad invocation or config
/// (exit 2), `Numeric` is a run that executed and failed (exit 1).
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numeric(String),
}

impl From<ssns::SsnsError> for CliError {
    fn from(e: ssns::SsnsError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

/// For library errors raised while digesting config-supplied values (grid
/// shape, exponents, time grids): those are the caller's fault, exit 2.
pub fn config_err(e: ssns::SsnsError) -> CliError {
    CliError::Usage(e.to_string())
}

#[derive(Parser, Debug)]
#[command(
    name = "ssns",
    version,
    about = "certificate toolkit for self-similar Navier-Stokes profiles"
)]
struct Cli {
    /// JSON run configuration; built-in defaults when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Directory receiving CSV reports and field snapshots.
    #[arg(long, global = true, default_value = ".", value_name = "DIR")]
    out: PathBuf,

    /// Seed offset for the synthesized estimator families.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Echo resolved constants and ledgers to stderr.
    #[arg(long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run the scalar-inequality battery and write lemmas.csv.
    VerifyLemmas,
    /// Measure the semigroup smoothing constant over a field family.
    EstimateC0,
    /// Iterate the mild formulation and write picard_report.csv.
    Picard,
    /// Integrate the rescaled equations and write direct_trace.csv.
    Direct,
    /// Mild solve, smallness threshold, and physical-norm bound audit.
    Pipeline,
}

fn main() {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("ssns: config error: {msg}");
            2
        }
        Err(CliError::Numeric(msg)) => {
            eprintln!("ssns: {msg}");
            1
        }
    };
    std::process::exit(code);
}

fn run(cli: &Cli) -> Result<(), CliError> {
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| CliError::Usage(format!("cannot create --out {}: {e}", cli.out.display())))?;
    match cli.command {
        Cmd::VerifyLemmas => commands::verify_lemmas(cli),
        Cmd::EstimateC0 => commands::estimate_c0(cli),
        Cmd::Picard => commands::picard(cli),
        Cmd::Direct => commands::direct(cli),
        Cmd::Pipeline => commands::pipeline(cli),
    }
}
