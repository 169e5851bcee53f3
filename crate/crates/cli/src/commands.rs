//! The five subcommand bodies. Each returns a [`CliError`] whose variant
//! fixes the process exit code; successful runs print or write their
//! artifact and return unit.

use std::path::Path;

use bellmax_core::anneal::{self, AnnealSchedule};
use bellmax_core::bellops::BellFamily;
use bellmax_core::bench::{scaling_report, BenchError};
use bellmax_core::limits;
use bellmax_core::oracles::horodecki_chsh;
use bellmax_core::qlinalg::random_density;

use crate::format::{
    emit, emit_json, read_state, result_file, trace_csv, StateFile, TermListFile,
};
use crate::CliError;

/// `construct`: write the canonical term list of a family as JSON.
pub fn construct(family: BellFamily, out: Option<&Path>) -> Result<(), CliError> {
    let list = family
        .term_list()
        .map_err(|e| CliError::Args(e.to_string()))?
        .canonicalize();
    emit_json(out, &TermListFile::from_list(&list))
}

/// `maximize`: anneal a state file against a family and write the result,
/// optionally with a per-cycle trace CSV.
pub fn maximize(
    state_path: &Path,
    family: BellFamily,
    schedule: &AnnealSchedule,
    restarts: usize,
    seed: u64,
    out: Option<&Path>,
    trace: Option<&Path>,
) -> Result<(), CliError> {
    schedule
        .validate()
        .map_err(|e| CliError::Args(e.to_string()))?;
    let rho = read_state(state_path)?;
    if rho.n_qubits() != family.n_parties() {
        return Err(CliError::Args(format!(
            "state holds {} qubits but the requested family acts on {}",
            rho.n_qubits(),
            family.n_parties()
        )));
    }
    let result = anneal::maximize(&rho, family, restarts, schedule, seed)
        .map_err(|e| CliError::Args(e.to_string()))?;
    let list = family
        .term_list()
        .map_err(|e| CliError::Args(e.to_string()))?;
    let file = result_file(&rho, family, &list, &result, seed, schedule)?;
    emit_json(out, &file)?;
    if let Some(trace_path) = trace {
        emit(Some(trace_path), &trace_csv(&result.trace))?;
    }
    Ok(())
}

/// `oracle`: print the closed-form two-qubit maximum with nine decimals.
pub fn oracle(state_path: &Path) -> Result<(), CliError> {
    let rho = read_state(state_path)?;
    let value = horodecki_chsh(&rho).map_err(|e| CliError::Args(e.to_string()))?;
    println!("{value:.9}");
    Ok(())
}

/// `bench`: time both evaluation paths over a size range; the CSV goes to
/// stdout, and `--out base` additionally writes `base.csv` and `base.json`.
pub fn bench(
    n_min: usize,
    n_max: usize,
    trials: usize,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let ceiling = limits::max_qubits();
    if n_min < 2 || n_min > n_max || n_max > ceiling {
        return Err(CliError::Args(format!(
            "size range {n_min}..={n_max} must satisfy 2 <= min <= max <= {ceiling}"
        )));
    }
    let report = scaling_report(n_min..=n_max, trials, out).map_err(|e| match e {
        BenchError::Io { path, source } => CliError::Io { path, source },
        other => CliError::Args(other.to_string()),
    })?;
    let mut csv = Vec::new();
    report
        .write_csv(&mut csv)
        .map_err(|e| CliError::Internal(format!("CSV formatting failed: {e}")))?;
    print!("{}", String::from_utf8_lossy(&csv));
    Ok(())
}

/// `sample`: draw a seeded random state and write it as a state file.
pub fn sample(n: usize, seed: u64, out: Option<&Path>) -> Result<(), CliError> {
    let rho = random_density(n, seed).map_err(|e| CliError::Args(e.to_string()))?;
    emit_json(out, &StateFile::from_density(&rho))
}
