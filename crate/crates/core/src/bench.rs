//! Scaling measurements for the two expectation-value paths.
//!
//! The point of the benchmark is the exponential wall: the canonical term
//! count of the recursive family quadruples every two parties, and a
//! single evaluation costs on the order of terms x 3^N through the
//! correlation tensor or terms x 4^N through the dense operator. The
//! report captures, per party count, the term count, the median seconds
//! per evaluation on both paths, and the predicted annealing step budget,
//! plus least-squares slopes of log2(time) against the party count.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;
use thiserror::Error;

use crate::anneal::AnnealSchedule;
use crate::bellops::{build, value_dense, value_tensor, BellopsError, MeasurementSettings};
use crate::qlinalg::{random_density, CorrelationTensor, QlinalgError};

/// Each timing sample repeats the evaluation until at least this much
/// wall time accumulates, so fast cases are not measured at clock
/// granularity.
pub const MIN_SAMPLE_SECONDS: f64 = 0.002;

/// Fixed internal stream for the states and settings the timings run on;
/// timings vary, the workload does not.
const WORKLOAD_SEED: u64 = 0x42454e4348;

static BENCH_RUNNING: AtomicBool = AtomicBool::new(false);

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("another benchmark run is already in progress in this process")]
    AlreadyRunning,
    #[error("benchmark needs a nonempty party-count range")]
    NoSizes,
    #[error("timing needs at least 3 trials, got {0}")]
    TooFewTrials(usize),
    #[error(transparent)]
    Bellops(#[from] BellopsError),
    #[error(transparent)]
    Qlinalg(#[from] QlinalgError),
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Wall-clock timers on one shared machine are meaningless when two
/// benchmark runs interleave, so runs exclude each other per process.
struct BenchGuard;

impl BenchGuard {
    fn acquire() -> Result<BenchGuard, BenchError> {
        if BENCH_RUNNING.swap(true, Ordering::SeqCst) {
            return Err(BenchError::AlreadyRunning);
        }
        Ok(BenchGuard)
    }
}

impl Drop for BenchGuard {
    fn drop(&mut self) {
        BENCH_RUNNING.store(false, Ordering::SeqCst);
    }
}

/// Median per-evaluation wall times at one party count.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EvalTiming {
    pub n: usize,
    /// Median seconds per evaluation through the dense operator.
    pub dense_s: f64,
    /// Median seconds per evaluation through the precomputed tensor.
    pub tensor_s: f64,
}

/// One party count's measurements.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    /// Party (qubit) count.
    pub n: usize,
    /// Canonical term count of the recursive family member.
    pub term_count: usize,
    /// Median seconds per evaluation through the dense operator.
    pub dense_s: f64,
    /// Median seconds per evaluation through the precomputed tensor.
    pub tensor_s: f64,
    /// Predicted annealing evaluation budget at the default schedule with
    /// one restart; what a full maximization would cost at this size.
    pub evals: u64,
}

/// The full scaling report.
#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Least-squares slope of log2(dense seconds) per added party.
    pub dense_log2_slope: Option<f64>,
    /// Least-squares slope of log2(tensor seconds) per added party.
    pub tensor_log2_slope: Option<f64>,
    /// Host description the timings were taken on.
    pub environment: String,
}

/// Canonical term count of the recursive family member on `n` parties.
pub fn term_count(n: usize) -> Result<usize, BenchError> {
    Ok(build(n)?.terms().len())
}

/// Upper bound on objective evaluations a maximization can spend:
/// restarts x max_cycles x moves_per_cycle.
pub fn step_budget(schedule: &AnnealSchedule, restarts: usize) -> u64 {
    restarts as u64 * schedule.max_cycles as u64 * schedule.moves_per_cycle as u64
}

/// Least-squares slope of log2(time) against n. Returns None with fewer
/// than three points or any nonpositive time.
pub fn log2_slope(points: &[(usize, f64)]) -> Option<f64> {
    if points.len() < 3 || !points.iter().all(|(_, t)| *t > 0.0) {
        return None;
    }
    let k = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (n, t) in points {
        let x = *n as f64;
        let y = t.log2();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let denom = k * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return None;
    }
    Some((k * sxy - sx * sy) / denom)
}

/// Seconds per call of `f`: one untimed warmup, then the call is repeated
/// enough times to cover [`MIN_SAMPLE_SECONDS`] and the average per call
/// is returned.
fn seconds_per_call(mut f: impl FnMut()) -> f64 {
    f();
    let mut reps: u64 = 1;
    loop {
        let started = Instant::now();
        for _ in 0..reps {
            f();
        }
        let elapsed = started.elapsed().as_secs_f64();
        if elapsed >= MIN_SAMPLE_SECONDS || reps >= 1 << 24 {
            return elapsed / reps as f64;
        }
        // Aim past the floor with some margin; at least double.
        let scale = (MIN_SAMPLE_SECONDS * 1.5 / elapsed.max(1e-9)).ceil() as u64;
        reps = (reps * scale.max(2)).min(1 << 24);
    }
}

fn median(mut samples: Vec<f64>) -> f64 {
    samples.sort_by(f64::total_cmp);
    samples[samples.len() / 2]
}

/// Times both evaluation paths at size `n`: the median over `trials`
/// independent seeded random (state, settings) pairs of the per-call wall
/// time. Tensor timings exclude the one-off tensor construction, matching
/// how the annealer amortizes it.
pub fn time_eval(n: usize, trials: usize) -> Result<EvalTiming, BenchError> {
    if trials < 3 {
        return Err(BenchError::TooFewTrials(trials));
    }
    let list = build(n)?;
    let mut dense = Vec::with_capacity(trials);
    let mut tensor = Vec::with_capacity(trials);
    for trial in 0..trials {
        let pair_seed = WORKLOAD_SEED
            .wrapping_add(1_000 * n as u64)
            .wrapping_add(trial as u64);
        let rho = random_density(n, pair_seed)?;
        let t = CorrelationTensor::from_density(&rho)?;
        let mut rng = ChaCha12Rng::seed_from_u64(pair_seed ^ 0x5e77);
        let settings = MeasurementSettings::random(n, &mut rng);
        dense.push(seconds_per_call(|| {
            let v = value_dense(&rho, &list, &settings).expect("sizes validated");
            std::hint::black_box(v);
        }));
        tensor.push(seconds_per_call(|| {
            let v = value_tensor(&t, &list, &settings).expect("sizes validated");
            std::hint::black_box(v);
        }));
    }
    Ok(EvalTiming {
        n,
        dense_s: median(dense),
        tensor_s: median(tensor),
    })
}

/// Description of the host the timings ran on.
fn environment() -> String {
    format!(
        "{} {}, {} build",
        std::env::consts::OS,
        std::env::consts::ARCH,
        if cfg!(debug_assertions) {
            "debug-assertions"
        } else {
            "release"
        }
    )
}

/// Measures term counts and both evaluation paths for every party count
/// in `n_range` and fits the growth slopes. When `out_base` is given the
/// report is also written next to it as `<out_base>.csv` and
/// `<out_base>.json`. Only one report can be in flight per process.
pub fn scaling_report(
    n_range: std::ops::RangeInclusive<usize>,
    trials: usize,
    out_base: Option<&Path>,
) -> Result<BenchReport, BenchError> {
    let _guard = BenchGuard::acquire()?;
    if n_range.is_empty() {
        return Err(BenchError::NoSizes);
    }

    let budget = step_budget(&AnnealSchedule::default(), 1);
    let mut rows = Vec::new();
    for n in n_range {
        let timing = time_eval(n, trials)?;
        rows.push(BenchRow {
            n,
            term_count: term_count(n)?,
            dense_s: timing.dense_s,
            tensor_s: timing.tensor_s,
            evals: budget,
        });
    }

    let dense_points: Vec<(usize, f64)> = rows.iter().map(|r| (r.n, r.dense_s)).collect();
    let tensor_points: Vec<(usize, f64)> = rows.iter().map(|r| (r.n, r.tensor_s)).collect();
    let report = BenchReport {
        dense_log2_slope: log2_slope(&dense_points),
        tensor_log2_slope: log2_slope(&tensor_points),
        rows,
        environment: environment(),
    };

    if let Some(base) = out_base {
        report.write_files(base)?;
    }
    Ok(report)
}

impl BenchReport {
    /// CSV with the fixed header `n,term_count,dense_s,tensor_s,evals`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "n,term_count,dense_s,tensor_s,evals")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.n, r.term_count, r.dense_s, r.tensor_s, r.evals
            )?;
        }
        Ok(())
    }

    /// Pretty-printed JSON of the whole report.
    pub fn write_json<W: Write>(&self, w: W) -> serde_json::Result<()> {
        serde_json::to_writer_pretty(w, self)
    }

    /// Writes `<base>.csv` and `<base>.json`.
    pub fn write_files(&self, base: &Path) -> Result<(), BenchError> {
        let with_ext = |ext: &str| -> PathBuf {
            let mut p = base.to_path_buf();
            p.set_extension(ext);
            p
        };
        let io_err = |path: PathBuf| move |source: std::io::Error| BenchError::Io { path, source };

        let csv_path = with_ext("csv");
        let csv_file = std::fs::File::create(&csv_path).map_err(io_err(csv_path.clone()))?;
        self.write_csv(csv_file).map_err(io_err(csv_path))?;

        let json_path = with_ext("json");
        let json_file = std::fs::File::create(&json_path).map_err(io_err(json_path.clone()))?;
        self.write_json(json_file).map_err(|e| BenchError::Io {
            path: json_path,
            source: std::io::Error::other(e),
        })?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn term_counts_follow_the_doubling_law() {
        let counts: Vec<usize> = (2..=8).map(|n| term_count(n).unwrap()).collect();
        assert_eq!(counts, vec![4, 4, 16, 16, 64, 64, 256]);
        assert!(term_count(1).is_err());
    }

    #[test]
    fn step_budget_multiplies_the_schedule_dimensions() {
        let schedule = AnnealSchedule::default();
        assert_eq!(step_budget(&schedule, 1), 5_000_000);
        assert_eq!(step_budget(&schedule, 3), 15_000_000);
        let small = AnnealSchedule {
            moves_per_cycle: 1000,
            max_cycles: 100,
            ..schedule
        };
        assert_eq!(step_budget(&small, 1), 100_000);
        assert_eq!(step_budget(&small, 2), 200_000);
    }

    #[test]
    fn slope_recovers_exact_exponential_growth() {
        let pow8: Vec<(usize, f64)> = (2..=6).map(|n| (n, 0.5 * 8f64.powi(n as i32))).collect();
        assert_abs_diff_eq!(log2_slope(&pow8).unwrap(), 3.0, epsilon = 1e-12);
        let pow2: Vec<(usize, f64)> = (1..=4).map(|n| (n, 2f64.powi(n as i32))).collect();
        assert_abs_diff_eq!(log2_slope(&pow2).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn slope_needs_three_positive_points() {
        assert!(log2_slope(&[(2, 1.0), (3, 2.0)]).is_none());
        assert!(log2_slope(&[(2, 1.0), (3, 0.0), (4, 2.0)]).is_none());
        assert!(log2_slope(&[(2, 1.0), (3, -1.0), (4, 2.0)]).is_none());
    }

    #[test]
    fn timing_rejects_too_few_trials() {
        assert!(matches!(time_eval(2, 2), Err(BenchError::TooFewTrials(2))));
    }

    #[test]
    fn dense_cost_grows_with_the_party_count() {
        let small = time_eval(2, 3).unwrap();
        let large = time_eval(4, 3).unwrap();
        assert!(small.dense_s > 0.0 && large.dense_s > 0.0);
        assert!(
            large.dense_s > small.dense_s,
            "dense eval at n=4 ({}) not slower than n=2 ({})",
            large.dense_s,
            small.dense_s
        );
    }

    #[test]
    fn reports_are_exclusive_within_the_process() {
        let held = BenchGuard::acquire().unwrap();
        assert!(matches!(
            scaling_report(2..=2, 3, None),
            Err(BenchError::AlreadyRunning)
        ));
        drop(held);
        let report = scaling_report(2..=2, 3, None).unwrap();
        assert_eq!(report.rows.len(), 1);
    }

    #[test]
    fn small_report_has_positive_times_and_true_term_counts() {
        let report = scaling_report(2..=3, 3, None).unwrap();
        let counts: Vec<usize> = report.rows.iter().map(|r| r.term_count).collect();
        assert_eq!(counts, vec![4, 4]);
        for r in &report.rows {
            assert!(r.dense_s > 0.0 && r.dense_s.is_finite());
            assert!(r.tensor_s > 0.0 && r.tensor_s.is_finite());
            assert_eq!(r.evals, 5_000_000);
        }
        assert!(!report.environment.is_empty());
        // Two sizes are not enough for a fit.
        assert!(report.dense_log2_slope.is_none());
    }

    #[test]
    fn report_files_land_next_to_the_base_path() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("report");
        let report = scaling_report(2..=2, 3, Some(&base)).unwrap();
        let csv = std::fs::read_to_string(base.with_extension("csv")).unwrap();
        assert!(csv.starts_with("n,term_count,dense_s,tensor_s,evals\n"));
        assert_eq!(csv.lines().count(), 1 + report.rows.len());
        let json = std::fs::read_to_string(base.with_extension("json")).unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed["rows"][0]["term_count"], 4);
    }

    #[test]
    fn csv_layout_is_stable() {
        let report = BenchReport {
            rows: vec![BenchRow {
                n: 2,
                term_count: 4,
                dense_s: 0.25,
                tensor_s: 0.125,
                evals: 10,
            }],
            dense_log2_slope: None,
            tensor_log2_slope: None,
            environment: "test".into(),
        };
        let mut out = Vec::new();
        report.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, "n,term_count,dense_s,tensor_s,evals\n2,4,0.25,0.125,10\n");
    }

    #[test]
    fn rejected_inputs_release_the_guard() {
        #[allow(clippy::reversed_empty_ranges)]
        let empty = 3..=2;
        assert!(matches!(
            scaling_report(empty, 3, None),
            Err(BenchError::NoSizes)
        ));
        assert!(matches!(
            scaling_report(2..=2, 0, None),
            Err(BenchError::TooFewTrials(0))
        ));
        // The guard must have been released by the failed runs above.
        let report = scaling_report(2..=2, 3, None).unwrap();
        assert_eq!(report.rows[0].n, 2);
    }
}
