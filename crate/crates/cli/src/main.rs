//! Command-line front end: constructs operator term lists, maximizes the
//! expectation value of a state read from a JSON file, evaluates the
//! closed-form two-qubit oracle, benchmarks the evaluation paths, and
//! samples random states.
//!
//! Exit codes are a stable contract: 0 success, 2 argument or flag
//! validation, 3 I/O failure, 4 invalid input state. The environment
//! variable `BELLMAX_MAX_QUBITS` overrides the process-wide size guard
//! (default 10).

mod commands;
mod format;

use std::path::PathBuf;

use bellmax_core::anneal::AnnealSchedule;
use bellmax_core::bellops::BellFamily;
use bellmax_core::limits;
use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

// ── Errors and exit codes ────────────────────────────────────────────────

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Args(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid state: {0}")]
    State(String),
    #[error("internal consistency check failed: {0}")]
    Internal(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Args(_) => 2,
            CliError::Io { .. } => 3,
            CliError::State(_) => 4,
            CliError::Internal(_) => 1,
        }
    }
}

// ── Argument surface ─────────────────────────────────────────────────────

#[derive(Parser)]
#[command(
    name = "bellmax",
    version,
    about = "Construct N-qubit Bell operators and maximize their expectation values"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    /// Two-party operator AA + AB + BA - BB (classical bound 2).
    Chsh,
    /// Three-party operator AAA - ABB - BAB - BBA (classical bound 2).
    Mermin,
    /// Four-party operator with 16 terms (classical bound 4).
    Mabk,
    /// Recursively extended family on N parties (classical bound 2).
    Recursion,
}

#[derive(Subcommand)]
enum Command {
    /// Write a canonical operator term list as JSON (stdout by default).
    Construct {
        /// Operator family.
        #[arg(long, value_enum)]
        family: FamilyArg,
        /// Party count; fixed-size families imply it, recursion requires it.
        #[arg(long)]
        n: Option<usize>,
        /// Output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Maximize the operator expectation value over all measurement angles
    /// for a state file; writes a JSON result (stdout by default).
    Maximize {
        /// Input state file (JSON).
        state: PathBuf,
        /// Operator family.
        #[arg(long, value_enum)]
        family: FamilyArg,
        /// Party count; fixed-size families imply it, recursion requires it.
        #[arg(long)]
        n: Option<usize>,
        /// Initial annealing temperature.
        #[arg(long, default_value_t = AnnealSchedule::default().t0)]
        t0: f64,
        /// Exponential cooling rate per cycle.
        #[arg(long, default_value_t = AnnealSchedule::default().lambda)]
        lambda: f64,
        /// Independent annealing restarts.
        #[arg(long, default_value_t = 8)]
        restarts: usize,
        /// Base seed for the random streams.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Hard cap on annealing cycles.
        #[arg(long, default_value_t = AnnealSchedule::default().max_cycles)]
        cycles: usize,
        /// Metropolis moves attempted per cycle.
        #[arg(long, default_value_t = AnnealSchedule::default().moves_per_cycle)]
        moves: usize,
        /// Result path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-cycle trace CSV path (columns cycle,temperature,best_value).
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Print the closed-form two-qubit maximum for a state file.
    Oracle {
        /// Input state file (JSON); must be a two-qubit state.
        state: PathBuf,
    },
    /// Time both evaluation paths across a range of party counts.
    Bench {
        /// Smallest party count.
        #[arg(long, default_value_t = 2)]
        n_min: usize,
        /// Largest party count.
        #[arg(long, default_value_t = 6)]
        n_max: usize,
        /// Timing trials per size (median is reported).
        #[arg(long, default_value_t = 3)]
        trials: usize,
        /// Base output path; the report lands at <out>.csv and <out>.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample a random state and write it as a state file.
    Sample {
        /// Party (qubit) count.
        #[arg(long)]
        n: usize,
        /// Sampler seed; the same seed reproduces the file byte for byte.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Resolves the (family, n) flag pair; fixed-size families accept a
/// matching `--n` or none at all.
fn resolve_family(family: FamilyArg, n: Option<usize>) -> Result<BellFamily, CliError> {
    let fixed = |expected: usize, resolved: BellFamily, label: &str| match n {
        None => Ok(resolved),
        Some(k) if k == expected => Ok(resolved),
        Some(k) => Err(CliError::Args(format!(
            "{label} is a {expected}-party operator, got --n {k}"
        ))),
    };
    match family {
        FamilyArg::Chsh => fixed(2, BellFamily::Chsh, "chsh"),
        FamilyArg::Mermin => fixed(3, BellFamily::Mermin, "mermin"),
        FamilyArg::Mabk => fixed(4, BellFamily::Mabk, "mabk"),
        FamilyArg::Recursion => match n {
            Some(k) => Ok(BellFamily::Recursion(k)),
            None => Err(CliError::Args(
                "recursion requires an explicit --n".to_string(),
            )),
        },
    }
}

/// Applies `BELLMAX_MAX_QUBITS` to the process-wide size guard.
fn apply_size_ceiling() -> Result<(), CliError> {
    if let Ok(raw) = std::env::var("BELLMAX_MAX_QUBITS") {
        let n: usize = raw.parse().map_err(|_| {
            CliError::Args(format!("BELLMAX_MAX_QUBITS must be a positive integer, got {raw:?}"))
        })?;
        if n == 0 {
            return Err(CliError::Args(
                "BELLMAX_MAX_QUBITS must be a positive integer, got 0".to_string(),
            ));
        }
        limits::set_max_qubits(n);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Construct { family, n, out } => {
            commands::construct(resolve_family(family, n)?, out.as_deref())
        }
        Command::Maximize {
            state,
            family,
            n,
            t0,
            lambda,
            restarts,
            seed,
            cycles,
            moves,
            out,
            trace,
        } => {
            let family = resolve_family(family, n)?;
            let schedule = AnnealSchedule {
                t0,
                lambda,
                moves_per_cycle: moves,
                max_cycles: cycles,
                ..AnnealSchedule::default()
            };
            commands::maximize(
                &state,
                family,
                &schedule,
                restarts,
                seed,
                out.as_deref(),
                trace.as_deref(),
            )
        }
        Command::Oracle { state } => commands::oracle(&state),
        Command::Bench {
            n_min,
            n_max,
            trials,
            out,
        } => commands::bench(n_min, n_max, trials, out.as_deref()),
        Command::Sample { n, seed, out } => commands::sample(n, seed, out.as_deref()),
    }
}

fn main() {
    let cli = Cli::parse();
    let outcome = apply_size_ceiling().and_then(|()| run(cli));
    if let Err(e) = outcome {
        eprintln!("bellmax: {e}");
        std::process::exit(e.exit_code());
    }
}
