//! End-to-end tests against the compiled binary: every subcommand, the
//! documented exit codes, file format round-trips, and cross-checks of
//! emitted values against the library and the closed-form oracle.

use std::path::Path;
use std::process::{Command, Output};

use bellmax_core::bellops::{
    chsh, pattern_from_str, value_dense, BellTerm, BellTermList, MeasurementSettings,
    Normalization, PartySettings,
};
use bellmax_core::oracles::{fixture, thirds_diagonal};
use bellmax_core::qlinalg::{Complex64, ComplexMatrix, DensityMatrix, SettingAngles};
use serde::Deserialize;

// ── Harness ──────────────────────────────────────────────────────────────

fn bellmax(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bellmax"))
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn run_ok(args: &[&str]) -> String {
    let out = bellmax(args);
    assert!(
        out.status.success(),
        "expected success for {args:?}, got {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("stdout should be UTF-8")
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("process should exit, not signal")
}

/// Serializes a matrix in the state-file layout the binary reads.
fn state_json(n_qubits: usize, m: &ComplexMatrix) -> String {
    let dim = m.dim();
    let rows: Vec<Vec<(String, String)>> = (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| {
                    let e = m.get(i, j);
                    (format!("{:.17e}", e.re), format!("{:.17e}", e.im))
                })
                .collect()
        })
        .collect();
    serde_json::to_string_pretty(&serde_json::json!({
        "n_qubits": n_qubits,
        "matrix": rows,
    }))
    .expect("state serializes")
}

fn write_state(path: &Path, rho: &DensityMatrix) {
    std::fs::write(path, state_json(rho.n_qubits(), rho.matrix())).expect("state file writes");
}

// ── Parsed output shapes ─────────────────────────────────────────────────

#[derive(Deserialize)]
struct TermOut {
    coefficient: f64,
    pattern: String,
}

#[derive(Deserialize)]
struct TermListOut {
    name: String,
    n_parties: usize,
    normalization: String,
    classical_bound: Option<f64>,
    terms: Vec<TermOut>,
}

#[derive(Deserialize)]
struct PartyAnglesOut {
    a_theta: f64,
    a_phi: f64,
    b_theta: f64,
    b_phi: f64,
}

#[derive(Deserialize)]
struct ResultOut {
    family: String,
    n_qubits: usize,
    best_value: f64,
    best_settings: Vec<PartyAnglesOut>,
    evaluations: u64,
    terminated: String,
    seed: u64,
}

fn settings_from(parties: &[PartyAnglesOut]) -> MeasurementSettings {
    MeasurementSettings::new(
        parties
            .iter()
            .map(|p| PartySettings {
                a: SettingAngles::new(p.a_theta, p.a_phi),
                b: SettingAngles::new(p.b_theta, p.b_phi),
            })
            .collect(),
    )
}

// ── construct ────────────────────────────────────────────────────────────

#[test]
fn construct_writes_the_three_party_operator() {
    let parsed: TermListOut =
        serde_json::from_str(&run_ok(&["construct", "--family", "mermin"])).unwrap();
    assert_eq!(parsed.name, "mermin");
    assert_eq!(parsed.n_parties, 3);
    assert_eq!(parsed.normalization, "literal");
    assert_eq!(parsed.classical_bound, Some(2.0));
    let rendered: Vec<(f64, &str)> = parsed
        .terms
        .iter()
        .map(|t| (t.coefficient, t.pattern.as_str()))
        .collect();
    assert_eq!(
        rendered,
        vec![(1.0, "AAA"), (-1.0, "ABB"), (-1.0, "BAB"), (-1.0, "BBA")]
    );
}

#[test]
fn construct_rejects_mismatched_party_counts() {
    let out = bellmax(&["construct", "--family", "mabk", "--n", "3"]);
    assert_eq!(exit_code(&out), 2);
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("4-party"),
        "stderr should explain the size mismatch"
    );

    let missing = bellmax(&["construct", "--family", "recursion"]);
    assert_eq!(exit_code(&missing), 2, "recursion without --n is an error");
}

#[test]
fn construct_counts_the_five_party_recursion() {
    let parsed: TermListOut = serde_json::from_str(&run_ok(&[
        "construct",
        "--family",
        "recursion",
        "--n",
        "5",
    ]))
    .unwrap();
    assert_eq!(parsed.name, "recursion-5");
    assert_eq!(parsed.n_parties, 5);
    assert_eq!(parsed.normalization, "recursion-normalized");
    assert_eq!(parsed.classical_bound, Some(2.0));
    assert_eq!(parsed.terms.len(), 16, "five-party canonical term count");
}

#[test]
fn constructed_lists_round_trip_through_assembly() {
    let parsed: TermListOut =
        serde_json::from_str(&run_ok(&["construct", "--family", "chsh"])).unwrap();
    let terms = parsed
        .terms
        .iter()
        .map(|t| {
            BellTerm::new(
                t.coefficient,
                pattern_from_str(&t.pattern).expect("patterns parse"),
            )
        })
        .collect();
    let rebuilt = BellTermList::from_parts(
        parsed.n_parties,
        terms,
        "roundtrip",
        parsed.classical_bound,
        Normalization::Literal,
    )
    .unwrap();

    let fix = fixture("chsh-optimal").unwrap();
    let from_file = value_dense(&fix.state, &rebuilt, &fix.settings).unwrap();
    let internal = value_dense(&fix.state, &chsh(), &fix.settings).unwrap();
    assert!(
        (from_file - internal).abs() <= 1e-12,
        "round-tripped list drifted: {from_file} vs {internal}"
    );
}

// ── maximize ─────────────────────────────────────────────────────────────

#[test]
fn maximize_recovers_the_thirds_mixture_value() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("thirds.json");
    let result_path = dir.path().join("result.json");
    let trace_path = dir.path().join("trace.csv");
    write_state(&state, &thirds_diagonal());

    run_ok(&[
        "maximize",
        state.to_str().unwrap(),
        "--family",
        "chsh",
        "--restarts",
        "8",
        "--seed",
        "5",
        "--out",
        result_path.to_str().unwrap(),
        "--trace",
        trace_path.to_str().unwrap(),
    ]);

    let parsed: ResultOut =
        serde_json::from_str(&std::fs::read_to_string(&result_path).unwrap()).unwrap();
    assert_eq!(parsed.family, "chsh");
    assert_eq!(parsed.n_qubits, 2);
    assert_eq!(parsed.seed, 5);
    assert!(parsed.evaluations > 0);
    assert!(["converged", "max-cycles"].contains(&parsed.terminated.as_str()));
    assert!(
        (parsed.best_value - 2.0 / 3.0).abs() <= 1e-3,
        "best value {} should be the analytic 2/3",
        parsed.best_value
    );

    // The written settings must reproduce the written value.
    let replayed = value_dense(
        &thirds_diagonal(),
        &chsh(),
        &settings_from(&parsed.best_settings),
    )
    .unwrap();
    assert!(
        (replayed - parsed.best_value).abs() <= 1e-9,
        "result file is not self-consistent: {replayed} vs {}",
        parsed.best_value
    );

    let trace = std::fs::read_to_string(&trace_path).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("cycle,temperature,best_value"));
    assert!(lines.next().is_some(), "trace should hold at least one cycle");
}

#[test]
fn corrupt_states_fail_with_the_validation_report() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("bad.json");
    let mut m = ComplexMatrix::zeros(4);
    m.set(0, 0, Complex64::new(1.0, 0.0));
    m.set(1, 1, Complex64::new(1.0, 0.0));
    std::fs::write(&state, state_json(2, &m)).unwrap();

    let out = bellmax(&["maximize", state.to_str().unwrap(), "--family", "chsh"]);
    assert_eq!(exit_code(&out), 4);
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("trace residual"),
        "stderr should carry the measured residual"
    );
}

#[test]
fn maximize_rejects_family_state_size_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("pair.json");
    run_ok(&[
        "sample",
        "--n",
        "2",
        "--seed",
        "1",
        "--out",
        state.to_str().unwrap(),
    ]);
    let out = bellmax(&["maximize", state.to_str().unwrap(), "--family", "mermin"]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn missing_state_files_are_io_errors() {
    let out = bellmax(&["maximize", "/nonexistent/state.json", "--family", "chsh"]);
    assert_eq!(exit_code(&out), 3);
}

// ── oracle ───────────────────────────────────────────────────────────────

#[test]
fn oracle_prints_the_fixture_values() {
    let dir = tempfile::tempdir().unwrap();

    let ghz_path = dir.path().join("ghz2.json");
    write_state(&ghz_path, &fixture("chsh-optimal").unwrap().state);
    assert_eq!(run_ok(&["oracle", ghz_path.to_str().unwrap()]), "2.828427125\n");

    let thirds_path = dir.path().join("thirds.json");
    write_state(&thirds_path, &thirds_diagonal());
    assert_eq!(
        run_ok(&["oracle", thirds_path.to_str().unwrap()]),
        "0.666666667\n"
    );
}

#[test]
fn oracle_rejects_three_qubit_states() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("triple.json");
    run_ok(&[
        "sample",
        "--n",
        "3",
        "--seed",
        "2",
        "--out",
        state.to_str().unwrap(),
    ]);
    let out = bellmax(&["oracle", state.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 2);
}

// ── sample ───────────────────────────────────────────────────────────────

#[test]
fn sampling_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let c = dir.path().join("c.json");
    run_ok(&["sample", "--n", "2", "--seed", "11", "--out", a.to_str().unwrap()]);
    run_ok(&["sample", "--n", "2", "--seed", "11", "--out", b.to_str().unwrap()]);
    run_ok(&["sample", "--n", "2", "--seed", "12", "--out", c.to_str().unwrap()]);
    let bytes_a = std::fs::read(&a).unwrap();
    assert_eq!(bytes_a, std::fs::read(&b).unwrap(), "same seed, same bytes");
    assert_ne!(bytes_a, std::fs::read(&c).unwrap(), "new seed, new state");
}

#[test]
fn sampled_states_feed_the_full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("s.json");
    let result_path = dir.path().join("r.json");
    run_ok(&["sample", "--n", "2", "--seed", "13", "--out", state.to_str().unwrap()]);

    let oracle_value: f64 = run_ok(&["oracle", state.to_str().unwrap()])
        .trim()
        .parse()
        .unwrap();
    run_ok(&[
        "maximize",
        state.to_str().unwrap(),
        "--family",
        "chsh",
        "--restarts",
        "8",
        "--seed",
        "9",
        "--out",
        result_path.to_str().unwrap(),
    ]);
    let parsed: ResultOut =
        serde_json::from_str(&std::fs::read_to_string(&result_path).unwrap()).unwrap();
    assert!(
        (parsed.best_value - oracle_value).abs() <= 1e-2,
        "search {} should agree with the oracle {oracle_value}",
        parsed.best_value
    );
}

// ── bench ────────────────────────────────────────────────────────────────

#[test]
fn bench_reports_stable_counts_and_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("report");

    let stdout = run_ok(&[
        "bench",
        "--n-min",
        "2",
        "--n-max",
        "4",
        "--trials",
        "3",
        "--out",
        base.to_str().unwrap(),
    ]);
    let mut lines = stdout.lines();
    assert_eq!(lines.next(), Some("n,term_count,dense_s,tensor_s,evals"));
    let counts: Vec<&str> = lines
        .map(|l| l.split(',').nth(1).expect("term_count column"))
        .collect();
    assert_eq!(counts, vec!["4", "4", "16"]);

    let csv = std::fs::read_to_string(base.with_extension("csv")).unwrap();
    assert!(csv.starts_with("n,term_count,dense_s,tensor_s,evals\n"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(base.with_extension("json")).unwrap())
            .unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 3);
    assert!(!json["environment"].as_str().unwrap().is_empty());

    // Timings vary between runs; the counts column must not.
    let rerun = run_ok(&["bench", "--n-min", "2", "--n-max", "4", "--trials", "3"]);
    let rerun_counts: Vec<&str> = rerun
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(rerun_counts, counts);
}

#[test]
fn bench_rejects_bad_ranges() {
    assert_eq!(exit_code(&bellmax(&["bench", "--n-min", "1", "--n-max", "3"])), 2);
    assert_eq!(exit_code(&bellmax(&["bench", "--n-min", "5", "--n-max", "3"])), 2);
    assert_eq!(exit_code(&bellmax(&["bench", "--n-min", "2", "--n-max", "99"])), 2);
}

// ── size guard ───────────────────────────────────────────────────────────

#[test]
fn size_ceiling_env_var_is_enforced() {
    let out = Command::new(env!("CARGO_BIN_EXE_bellmax"))
        .args(["construct", "--family", "recursion", "--n", "4"])
        .env("BELLMAX_MAX_QUBITS", "3")
        .output()
        .expect("binary should spawn");
    assert_eq!(exit_code(&out), 2, "ceiling of 3 must reject a 4-party build");

    let bad = Command::new(env!("CARGO_BIN_EXE_bellmax"))
        .args(["construct", "--family", "chsh"])
        .env("BELLMAX_MAX_QUBITS", "zero")
        .output()
        .expect("binary should spawn");
    assert_eq!(exit_code(&bad), 2, "unparseable ceiling is an argument error");
}
