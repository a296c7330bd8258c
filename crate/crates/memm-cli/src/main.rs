//! `memm` — command-line front end: validate models, solve for the
//! entropy-minimal measure change, simulate, and verify.

mod commands;
mod output;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Exit codes: 0 success, 2 configuration or model error, 3 solver
/// nonconvergence, 4 verification failure.
pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NO_CONVERGENCE: u8 = 3;
pub const EXIT_VERIFY_FAILED: u8 = 4;

#[derive(Parser)]
#[command(
    name = "memm",
    about = "Minimal entropy martingale measure solver for jump-diffusion stochastic volatility markets",
    long_about = "Solves the implicit jump-kernel equation and the semi-linear transport \
equation for the minimal entropy martingale measure, exports the value surface and \
measure-change fields, and verifies the result by Monte Carlo.\n\n\
Model files are TOML with a `kind` key selecting the coefficient family \
(constant | deterministic | orthogonal | bns); run `memm schema` for the full \
field reference and `--preset` for shipped configurations."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ModelSource {
    /// Path to a TOML model file.
    #[arg(long, conflicts_with = "preset")]
    model: Option<std::path::PathBuf>,
    /// Built-in preset: bs-flat | single-atom | deterministic | orthogonal | bns.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    source: ModelSource,
    /// Grid resolution as NTxNY (time nodes x state nodes).
    #[arg(long, default_value = "64x64", value_parser = parse_grid)]
    grid: (usize, usize),
    /// Sup-norm tolerance of the fixed-point iteration.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Output directory.
    #[arg(long, default_value = "runs")]
    out: std::path::PathBuf,
}

#[derive(Args)]
struct McArgs {
    /// Number of Monte Carlo paths.
    #[arg(long, default_value_t = 100_000)]
    paths: usize,
    /// Time steps per path.
    #[arg(long, default_value_t = 500)]
    steps: usize,
    /// RNG seed; paths are reproducible per (seed, path index).
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Check the model assumptions on a sampling grid.
    Validate {
        #[command(flatten)]
        source: ModelSource,
        #[arg(long, default_value = "64x64", value_parser = parse_grid)]
        grid: (usize, usize),
    },
    /// Solve the value surface and measure-change fields.
    Solve(SolveArgs),
    /// Simulate paths and write a summary (optionally the paths themselves).
    Simulate {
        #[command(flatten)]
        solve: SolveArgs,
        #[command(flatten)]
        mc: McArgs,
        /// Simulate under the solved measure instead of the objective one.
        #[arg(long)]
        qstar: bool,
        /// Write one CSV row per path step (only sensible for small runs).
        #[arg(long)]
        dump_paths: bool,
    },
    /// Solve, then run the Monte Carlo verification program.
    Verify {
        #[command(flatten)]
        solve: SolveArgs,
        #[command(flatten)]
        mc: McArgs,
        /// z-score threshold for the four statistics.
        #[arg(long, default_value_t = 4.0)]
        z_max: f64,
        /// Negate the solved jump kernel before verifying (negative control).
        #[arg(long, hide = true)]
        corrupt_fields: bool,
    },
    /// Admissibility report for an OU-subordinator (bns) model.
    BnsCheck {
        #[command(flatten)]
        source: ModelSource,
    },
    /// Print the model-file schema reference.
    Schema,
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected NTxNY, got '{s}'"))?;
    let nt: usize = a.parse().map_err(|_| format!("bad time resolution '{a}'"))?;
    let ny: usize = b.parse().map_err(|_| format!("bad state resolution '{b}'"))?;
    if nt < 2 || ny < 2 {
        return Err("grid needs at least 2 nodes per axis".into());
    }
    Ok((nt, ny))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Validate { source, grid } => commands::cmd_validate(&source, grid),
        Command::Solve(args) => commands::cmd_solve(&args).map(|_| EXIT_OK),
        Command::Simulate {
            solve,
            mc,
            qstar,
            dump_paths,
        } => commands::cmd_simulate(&solve, &mc, qstar, dump_paths),
        Command::Verify {
            solve,
            mc,
            z_max,
            corrupt_fields,
        } => commands::cmd_verify(&solve, &mc, z_max, corrupt_fields),
        Command::BnsCheck { source } => commands::cmd_bns_check(&source),
        Command::Schema => {
            println!("{}", commands::SCHEMA_REFERENCE);
            Ok(EXIT_OK)
        }
    };
    match code {
        Ok(c) => ExitCode::from(c),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::exit_code_for(&e))
        }
    }
}
