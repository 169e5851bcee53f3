//! On-disk formats: states and term lists as JSON, results as JSON,
//! annealing traces as CSV. Complex matrix entries are serialized as
//! decimal strings with 18 significant digits so files round-trip
//! exactly; all angles are radians.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use bellmax_core::anneal::{AnnealSchedule, OptimizationResult, TracePoint};
use bellmax_core::bellops::{value_dense, BellFamily, BellTermList};
use bellmax_core::limits;
use bellmax_core::qlinalg::{validate_density, Complex64, ComplexMatrix, DensityMatrix};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Validation tolerance for states read back from files; looser than the
/// in-memory tolerance to absorb decimal round-tripping.
pub const STATE_TOL: f64 = 1e-9;

/// Result files must reproduce their best value on re-evaluation this
/// tightly; the check runs inside the writer.
pub const RESULT_RECHECK_TOL: f64 = 1e-9;

fn fmt_real(x: f64) -> String {
    format!("{x:.17e}")
}

fn parse_real(s: &str) -> Result<f64, CliError> {
    let x: f64 = s
        .parse()
        .map_err(|_| CliError::State(format!("unparseable matrix entry {s:?}")))?;
    if !x.is_finite() {
        return Err(CliError::State(format!("non-finite matrix entry {s:?}")));
    }
    Ok(x)
}

// ── State files ──────────────────────────────────────────────────────────

/// A density matrix on disk: row-major nested arrays of [re, im] pairs,
/// each component a decimal string.
#[derive(Serialize, Deserialize)]
pub struct StateFile {
    pub n_qubits: usize,
    pub matrix: Vec<Vec<(String, String)>>,
}

impl StateFile {
    pub fn from_density(rho: &DensityMatrix) -> Self {
        let dim = rho.dim();
        let m = rho.matrix();
        let matrix = (0..dim)
            .map(|i| {
                (0..dim)
                    .map(|j| {
                        let e = m.get(i, j);
                        (fmt_real(e.re), fmt_real(e.im))
                    })
                    .collect()
            })
            .collect();
        StateFile {
            n_qubits: rho.n_qubits(),
            matrix,
        }
    }

    /// Parses and validates the matrix; every violated invariant is
    /// reported with its measured residual.
    pub fn into_density(self) -> Result<DensityMatrix, CliError> {
        let dim = self.matrix.len();
        let max_dim = 1usize << limits::max_qubits();
        if dim == 0 || dim > max_dim {
            return Err(CliError::State(format!(
                "matrix dimension {dim} outside the supported range 1..={max_dim}"
            )));
        }
        let mut m = ComplexMatrix::zeros(dim);
        for (i, row) in self.matrix.iter().enumerate() {
            if row.len() != dim {
                return Err(CliError::State(format!(
                    "row {i} has {} entries, expected {dim}",
                    row.len()
                )));
            }
            for (j, (re, im)) in row.iter().enumerate() {
                m.set(i, j, Complex64::new(parse_real(re)?, parse_real(im)?));
            }
        }
        let report = validate_density(&m, self.n_qubits, STATE_TOL);
        if !report.is_valid() {
            return Err(CliError::State(report.to_string()));
        }
        DensityMatrix::with_tolerance(self.n_qubits, m, STATE_TOL)
            .map_err(|e| CliError::State(e.to_string()))
    }
}

/// Reads and validates a state file.
pub fn read_state(path: &Path) -> Result<DensityMatrix, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.to_owned(),
        source: e,
    })?;
    let file: StateFile = serde_json::from_str(&text)
        .map_err(|e| CliError::State(format!("{}: {e}", path.display())))?;
    file.into_density()
}

// ── Term-list files ──────────────────────────────────────────────────────

#[derive(Serialize, Deserialize)]
pub struct TermEntry {
    pub coefficient: f64,
    /// One choice tag per party, e.g. "ABBA".
    pub pattern: String,
}

/// A canonical operator term list on disk.
#[derive(Serialize, Deserialize)]
pub struct TermListFile {
    pub name: String,
    pub n_parties: usize,
    pub normalization: String,
    pub classical_bound: Option<f64>,
    pub terms: Vec<TermEntry>,
}

impl TermListFile {
    pub fn from_list(list: &BellTermList) -> Self {
        TermListFile {
            name: list.name().to_string(),
            n_parties: list.n_parties(),
            normalization: list.normalization().to_string(),
            classical_bound: list.classical_bound(),
            terms: list
                .terms()
                .iter()
                .map(|t| TermEntry {
                    coefficient: t.coefficient,
                    pattern: t.pattern_string(),
                })
                .collect(),
        }
    }
}

// ── Result files ─────────────────────────────────────────────────────────

#[derive(Serialize, Deserialize)]
pub struct PartyAngles {
    pub a_theta: f64,
    pub a_phi: f64,
    pub b_theta: f64,
    pub b_phi: f64,
}

#[derive(Serialize, Deserialize)]
pub struct ScheduleParams {
    pub t0: f64,
    pub lambda: f64,
    pub moves_per_cycle: usize,
    pub max_cycles: usize,
    pub stop_epsilon: f64,
    pub stop_window: usize,
}

/// A maximization outcome on disk; `best_settings` holds radians.
#[derive(Serialize, Deserialize)]
pub struct ResultFile {
    pub family: String,
    pub n_qubits: usize,
    pub best_value: f64,
    pub best_settings: Vec<PartyAngles>,
    pub evaluations: u64,
    pub terminated: String,
    pub seed: u64,
    pub schedule: ScheduleParams,
}

fn family_label(family: BellFamily) -> &'static str {
    match family {
        BellFamily::Chsh => "chsh",
        BellFamily::Mermin => "mermin",
        BellFamily::Mabk => "mabk",
        BellFamily::Recursion(_) => "recursion",
    }
}

/// Builds a result file, re-evaluating the returned settings on the input
/// state first: a result that does not reproduce its own best value is
/// never written.
pub fn result_file(
    rho: &DensityMatrix,
    family: BellFamily,
    list: &BellTermList,
    result: &OptimizationResult,
    seed: u64,
    schedule: &AnnealSchedule,
) -> Result<ResultFile, CliError> {
    let recheck = value_dense(rho, list, &result.best_settings)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    if (recheck - result.best_value).abs() > RESULT_RECHECK_TOL {
        return Err(CliError::Internal(format!(
            "re-evaluated value {recheck} does not reproduce best_value {}",
            result.best_value
        )));
    }
    Ok(ResultFile {
        family: family_label(family).to_string(),
        n_qubits: rho.n_qubits(),
        best_value: result.best_value,
        best_settings: result
            .best_settings
            .parties()
            .iter()
            .map(|p| PartyAngles {
                a_theta: p.a.theta(),
                a_phi: p.a.phi(),
                b_theta: p.b.theta(),
                b_phi: p.b.phi(),
            })
            .collect(),
        evaluations: result.evaluations,
        terminated: result.terminated.as_str().to_string(),
        seed,
        schedule: ScheduleParams {
            t0: schedule.t0,
            lambda: schedule.lambda,
            moves_per_cycle: schedule.moves_per_cycle,
            max_cycles: schedule.max_cycles,
            stop_epsilon: schedule.stop_epsilon,
            stop_window: schedule.stop_window,
        },
    })
}

// ── Trace CSV ────────────────────────────────────────────────────────────

pub fn trace_csv(trace: &[TracePoint]) -> String {
    let mut out = String::from("cycle,temperature,best_value\n");
    for p in trace {
        writeln!(out, "{},{},{}", p.cycle, p.temperature, p.best_value)
            .expect("writing to a string cannot fail");
    }
    out
}

// ── Output plumbing ──────────────────────────────────────────────────────

/// Writes `content` to the path, or to stdout when no path is given.
pub fn emit(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, content).map_err(|e| CliError::Io {
            path: path.to_owned(),
            source: e,
        }),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

/// Serializes a value as pretty JSON and emits it.
pub fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Internal(format!("serialization failed: {e}")))?;
    text.push('\n');
    emit(out, &text)
}
