use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use robsyn_cli::commands::{self, CliError};
use robsyn_cli::config::{self, Overrides};

/// Robust state-feedback synthesis for plants with sampled black-box
/// nonlinearities: grid sampling, certificate search, and closed-loop
/// verification.
#[derive(Parser)]
#[command(name = "robsyn", version, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Builtin system id (example1 | example2) or path to a system TOML file
    #[arg(long)]
    system: Option<String>,

    /// Grid point counts per dimension, states first then inputs (e.g. 31,31,31)
    #[arg(long)]
    grid: Option<String>,

    /// Input-budget grid as start:stop:count (linear, inclusive) or a single value
    #[arg(long = "r-grid")]
    r_grid: Option<String>,

    /// Starting scale of the region search (default: 5% of the box-inscribed cap)
    #[arg(long)]
    alpha0: Option<f64>,

    /// Relative width at which the scale bisection stops
    #[arg(long = "alpha-tol")]
    alpha_tol: Option<f64>,

    /// Refinement-round cap (exact round count when the input is unconstrained)
    #[arg(long = "nmax")]
    n_max: Option<usize>,

    /// Whether the input budget constrains the gain
    #[arg(long = "constrain-input", value_name = "auto|on|off")]
    constrain_input: Option<String>,

    /// Output directory
    #[arg(long, default_value = "out", value_name = "DIR")]
    out: PathBuf,

    /// Reserved; every run is deterministic
    #[arg(long, hide = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the nonlinearity on a grid and report the inferred structure
    Sample(CommonArgs),
    /// Search for the largest certifiable region over the input-budget grid
    Synthesize(CommonArgs),
    /// Re-check a synthesis report and audit simulated boundary trajectories
    Verify {
        #[command(flatten)]
        args: CommonArgs,
        /// Report to verify (default: <OUT>/report.json)
        report: Option<PathBuf>,
    },
}

fn overrides(args: &CommonArgs) -> Result<Overrides, CliError> {
    Ok(Overrides {
        grid: args.grid.as_deref().map(config::parse_grid).transpose()?,
        r_grid: args.r_grid.as_deref().map(config::parse_r_grid).transpose()?,
        alpha0: args.alpha0,
        alpha_tol: args.alpha_tol,
        n_max: args.n_max,
        constrain_input: args
            .constrain_input
            .as_deref()
            .map(config::parse_constrain_input)
            .transpose()?,
    })
}

fn resolved(args: &CommonArgs) -> Result<config::RunConfig, CliError> {
    let system = args
        .system
        .as_deref()
        .ok_or_else(|| CliError::Usage("--system is required".into()))?;
    config::resolve(system, &overrides(args)?, &args.out)
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Sample(args) => commands::cmd_sample(&resolved(&args)?),
        Command::Synthesize(args) => commands::cmd_synthesize(&resolved(&args)?),
        Command::Verify { args, report } => {
            commands::cmd_verify(&args.out, report.as_deref(), args.system.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}
