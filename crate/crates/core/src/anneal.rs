//! Stochastic maximization of Bell expression values over measurement
//! angles.
//!
//! The expectation Tr(rho B(angles)) is a smooth trigonometric function
//! of 4N angles with many local maxima. The search stack layered here:
//!
//! * [`anneal`]: simulated annealing with an exponential temperature
//!   schedule and single-angle Gaussian moves whose width shrinks with
//!   the temperature.
//! * [`simplex_refine`]: a derivative-free Nelder-Mead polish that tightens
//!   the annealer's answer to local-optimum precision.
//! * [`grid_seed`]: exhaustive coarse grid scan, affordable only for very
//!   few parties, used as an independent starting point and cross-check.
//! * [`maximize`]: seeded multi-restart driver combining anneal and
//!   refine, returning the best run.
//!
//! Everything is deterministic given a seed; restarts run sequentially
//! and derive their own streams from the base seed via [`restart_seed`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::bellops::{
    value_dense, value_from_vectors, BellFamily, BellTermList, BellopsError, MeasurementSettings,
    PartySettings,
};
use crate::qlinalg::{CorrelationTensor, DensityMatrix, SettingAngles};

/// Above this party count the cost function falls back to assembling the
/// dense operator per evaluation instead of contracting a precomputed
/// correlation tensor.
pub const TENSOR_PATH_MAX_QUBITS: usize = 6;

/// Largest party count the exhaustive grid scan accepts.
pub const GRID_MAX_PARTIES: usize = 3;

/// Largest per-angle resolution the exhaustive grid scan accepts.
pub const GRID_MAX_RESOLUTION: usize = 6;

/// Tolerance used for the polish step inside [`maximize`].
pub const REFINE_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum AnnealError {
    #[error("invalid schedule: {0}")]
    Schedule(String),
    #[error("restart count must be at least 1")]
    NoRestarts,
    #[error(
        "grid scan limited to {max_parties} parties at resolution {max_resolution}, \
         got {parties} parties at resolution {resolution}"
    )]
    GridTooLarge {
        parties: usize,
        resolution: usize,
        max_parties: usize,
        max_resolution: usize,
    },
    #[error("refinement tolerance must be positive and finite")]
    BadTolerance,
    #[error(transparent)]
    Bellops(#[from] BellopsError),
}

// ── Schedule ─────────────────────────────────────────────────────────────

/// Cooling schedule and stopping rule for [`anneal`].
#[derive(Debug, Clone, PartialEq)]
pub struct AnnealSchedule {
    /// Starting temperature; must be positive.
    pub t0: f64,
    /// Exponential decay rate per cycle; must be positive.
    pub lambda: f64,
    /// Metropolis moves attempted per cycle.
    pub moves_per_cycle: usize,
    /// Hard cap on the number of cycles.
    pub max_cycles: usize,
    /// Stop once the best value improved by less than this over the window.
    pub stop_epsilon: f64,
    /// Number of trailing cycles the improvement test looks back over.
    pub stop_window: usize,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        AnnealSchedule {
            t0: 1.0,
            lambda: 0.01,
            moves_per_cycle: 1000,
            max_cycles: 5000,
            stop_epsilon: 1e-6,
            stop_window: 50,
        }
    }
}

impl AnnealSchedule {
    /// Temperature at a given cycle: t0 * exp(-lambda * cycle).
    pub fn temperature(&self, cycle: usize) -> f64 {
        self.t0 * (-self.lambda * cycle as f64).exp()
    }

    pub fn validate(&self) -> Result<(), AnnealError> {
        let fail = |msg: &str| Err(AnnealError::Schedule(msg.into()));
        if !(self.t0.is_finite() && self.t0 > 0.0) {
            return fail("t0 must be positive and finite");
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return fail("lambda must be positive and finite");
        }
        if self.moves_per_cycle == 0 {
            return fail("moves_per_cycle must be at least 1");
        }
        if self.max_cycles == 0 {
            return fail("max_cycles must be at least 1");
        }
        if !(self.stop_epsilon.is_finite() && self.stop_epsilon > 0.0) {
            return fail("stop_epsilon must be positive and finite");
        }
        if self.stop_window == 0 {
            return fail("stop_window must be at least 1");
        }
        Ok(())
    }
}

// ── Results ──────────────────────────────────────────────────────────────

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// The windowed improvement fell below `stop_epsilon` (for the
    /// annealer) or the simplex value spread fell below `tol`.
    Converged,
    /// The cycle or iteration cap was reached first.
    MaxCycles,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxCycles => "max-cycles",
        }
    }
}

/// One per-cycle snapshot of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub cycle: usize,
    pub temperature: f64,
    /// Best value seen so far; nondecreasing along the trace.
    pub best_value: f64,
    /// Cumulative objective evaluations up to the end of this cycle.
    pub evaluations: u64,
}

/// Outcome of [`anneal`], [`simplex_refine`] or [`maximize`].
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub best_value: f64,
    pub best_settings: MeasurementSettings,
    pub trace: Vec<TracePoint>,
    /// Total objective evaluations (for `maximize`, summed over restarts).
    pub evaluations: u64,
    pub terminated: Termination,
}

// ── Objective ────────────────────────────────────────────────────────────

/// The function being maximized: Tr(rho B(settings)) for a fixed state
/// and term list. Holds the precomputed correlation tensor when the party
/// count permits; otherwise evaluation assembles the dense operator.
struct Objective<'a> {
    rho: &'a DensityMatrix,
    list: &'a BellTermList,
    tensor: Option<CorrelationTensor>,
}

impl<'a> Objective<'a> {
    fn new(rho: &'a DensityMatrix, list: &'a BellTermList) -> Result<Self, AnnealError> {
        if rho.n_qubits() != list.n_parties() {
            return Err(BellopsError::PartyMismatch {
                expected: list.n_parties(),
                actual: rho.n_qubits(),
            }
            .into());
        }
        let tensor = if list.n_parties() <= TENSOR_PATH_MAX_QUBITS {
            Some(CorrelationTensor::from_density(rho).map_err(BellopsError::from)?)
        } else {
            None
        };
        Ok(Objective { rho, list, tensor })
    }

    fn n_parties(&self) -> usize {
        self.list.n_parties()
    }

    fn value(&self, s: &MeasurementSettings) -> f64 {
        match &self.tensor {
            Some(t) => {
                let mut scratch = Vec::new();
                value_from_vectors(t, self.list, &s.vectors(), &mut scratch)
            }
            None => value_dense(self.rho, self.list, s).expect("party counts checked"),
        }
    }
}

/// Walker state for the hot loop: flat angles, the per-party unit vectors
/// kept in sync incrementally, and a reusable contraction buffer.
struct Walker<'a, 'b> {
    objective: &'b Objective<'a>,
    flat: Vec<f64>,
    vectors: Vec<[[f64; 3]; 2]>,
    scratch: Vec<f64>,
    evaluations: u64,
}

impl<'a, 'b> Walker<'a, 'b> {
    fn new(objective: &'b Objective<'a>, init: &MeasurementSettings) -> Self {
        Walker {
            objective,
            flat: init.to_flat(),
            vectors: init.vectors(),
            scratch: Vec::new(),
            evaluations: 0,
        }
    }

    fn eval(&mut self) -> f64 {
        self.evaluations += 1;
        match &self.objective.tensor {
            Some(t) => value_from_vectors(
                t,
                self.objective.list,
                &self.vectors,
                &mut self.scratch,
            ),
            None => {
                let s = MeasurementSettings::from_flat(&self.flat);
                value_dense(self.objective.rho, self.objective.list, &s)
                    .expect("party counts checked")
            }
        }
    }
}

// ── Moves ────────────────────────────────────────────────────────────────

/// Overwrites the angle pair containing `index` with the normalized pair
/// obtained after replacing that one angle by `raw`. Thetas fold back into
/// [0, pi] by reflection, phis wrap mod 2 pi; the partner angle is left
/// as it was. Returns the normalized pair.
fn apply_raw(flat: &mut [f64], index: usize, raw: f64) -> SettingAngles {
    let pair = index - index % 2;
    let s = if index.is_multiple_of(2) {
        SettingAngles::normalized(raw, flat[pair + 1])
    } else {
        SettingAngles::normalized(flat[pair], raw)
    };
    flat[pair] = s.theta();
    flat[pair + 1] = s.phi();
    s
}

/// Standard Metropolis rule for maximization, applied to an externally
/// drawn uniform variate `u` in [0, 1): improvements (`delta >= 0`) are
/// always accepted, and a deterioration is accepted iff
/// u < exp(delta / temperature). At temperature zero only improvements
/// pass.
pub fn metropolis_accept(delta: f64, temperature: f64, u: f64) -> bool {
    if delta >= 0.0 {
        return true;
    }
    if temperature <= 0.0 {
        return false;
    }
    u < (delta / temperature).exp()
}

/// Proposal move: picks one of the 4N angles uniformly and adds a Gaussian
/// step with width pi * min(1, temperature / t0), then renormalizes the
/// touched pair (theta reflected into [0, pi], phi wrapped mod 2 pi). All
/// other angles are unchanged; at zero temperature the output equals the
/// input.
pub fn propose<R: Rng + ?Sized>(
    s: &MeasurementSettings,
    temperature: f64,
    t0: f64,
    rng: &mut R,
) -> MeasurementSettings {
    assert!(t0 > 0.0, "t0 must be positive");
    let mut flat = s.to_flat();
    let index = rng.random_range(0..flat.len());
    let sigma = std::f64::consts::PI * (temperature / t0).clamp(0.0, 1.0);
    let step: f64 = StandardNormal.sample(rng);
    let raw = flat[index] + sigma * step;
    apply_raw(&mut flat, index, raw);
    MeasurementSettings::from_flat(&flat)
}

// ── Annealing ────────────────────────────────────────────────────────────

/// Core chain shared by [`anneal`] and [`maximize`]: starts from `init`
/// and applies the single-angle move inline against the walker's cached
/// vectors (equivalent to `propose` + `metropolis_accept`, without
/// rebuilding settings per move).
fn run_chain<R: Rng + ?Sized>(
    objective: &Objective,
    init: &MeasurementSettings,
    schedule: &AnnealSchedule,
    rng: &mut R,
) -> OptimizationResult {
    let mut w = Walker::new(objective, init);
    let mut current = w.eval();
    let mut best_value = current;
    let mut best_flat = w.flat.clone();
    let mut trace = Vec::new();
    let mut terminated = Termination::MaxCycles;
    let n_angles = w.flat.len();

    for cycle in 0..schedule.max_cycles {
        let temperature = schedule.temperature(cycle);
        let sigma = std::f64::consts::PI * (temperature / schedule.t0).clamp(0.0, 1.0);
        for _ in 0..schedule.moves_per_cycle {
            let index = rng.random_range(0..n_angles);
            let step: f64 = StandardNormal.sample(rng);
            let pair = index - index % 2;
            let party = index / 4;
            let slot = (index % 4) / 2;
            let saved = (w.flat[pair], w.flat[pair + 1], w.vectors[party][slot]);
            let raw = w.flat[index] + sigma * step;
            let s = apply_raw(&mut w.flat, index, raw);
            w.vectors[party][slot] = s.vector();
            let candidate = w.eval();
            let u: f64 = rng.random();
            if metropolis_accept(candidate - current, temperature, u) {
                current = candidate;
                if candidate > best_value {
                    best_value = candidate;
                    best_flat.copy_from_slice(&w.flat);
                }
            } else {
                w.flat[pair] = saved.0;
                w.flat[pair + 1] = saved.1;
                w.vectors[party][slot] = saved.2;
            }
        }
        trace.push(TracePoint {
            cycle,
            temperature,
            best_value,
            evaluations: w.evaluations,
        });
        if cycle >= schedule.stop_window {
            let previous = trace[cycle - schedule.stop_window].best_value;
            if best_value - previous < schedule.stop_epsilon {
                terminated = Termination::Converged;
                break;
            }
        }
    }

    OptimizationResult {
        best_value,
        best_settings: MeasurementSettings::from_flat(&best_flat),
        trace,
        evaluations: w.evaluations,
        terminated,
    }
}

/// Runs one annealing chain from uniformly random settings drawn from the
/// seeded stream. The trace records, per cycle, the temperature, the
/// running best and the cumulative evaluation count. The run stops early
/// once the best value improved by less than `stop_epsilon` over the last
/// `stop_window` cycles.
pub fn anneal(
    rho: &DensityMatrix,
    list: &BellTermList,
    schedule: &AnnealSchedule,
    seed: u64,
) -> Result<OptimizationResult, AnnealError> {
    schedule.validate()?;
    let objective = Objective::new(rho, list)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let init = MeasurementSettings::random(objective.n_parties(), &mut rng);
    Ok(run_chain(&objective, &init, schedule, &mut rng))
}

// ── Nelder-Mead polish ───────────────────────────────────────────────────

/// Nelder-Mead over the objective; shared by the public wrapper and the
/// restart driver. Returns the refined result with one trace point per
/// iteration.
fn refine_with(
    objective: &Objective,
    start: &MeasurementSettings,
    tol: f64,
) -> Result<OptimizationResult, AnnealError> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(AnnealError::BadTolerance);
    }
    if start.n_parties() != objective.n_parties() {
        return Err(BellopsError::PartyMismatch {
            expected: objective.n_parties(),
            actual: start.n_parties(),
        }
        .into());
    }

    let x0 = start.to_flat();
    let d = x0.len();
    let mut evaluations: u64 = 0;
    let eval = |x: &[f64], count: &mut u64| -> f64 {
        *count += 1;
        objective.value(&MeasurementSettings::from_flat(x))
    };

    let mut vertices: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
    vertices.push(x0.clone());
    for k in 0..d {
        let mut v = x0.clone();
        v[k] += 0.05;
        vertices.push(v);
    }
    let mut values: Vec<f64> = vertices
        .iter()
        .map(|v| eval(v, &mut evaluations))
        .collect();

    let mut trace = Vec::new();
    let mut terminated = Termination::MaxCycles;
    let max_iters = 2000 * objective.n_parties();
    for iteration in 0..max_iters {
        // Order best first (maximization).
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
        let best = order[0];
        let second_worst = order[d - 1];
        let worst = order[d];
        trace.push(TracePoint {
            cycle: iteration,
            temperature: 0.0,
            best_value: values[best],
            evaluations,
        });
        if values[best] - values[worst] < tol {
            terminated = Termination::Converged;
            break;
        }

        // Centroid of all vertices except the worst.
        let mut centroid = vec![0.0f64; d];
        for (i, v) in vertices.iter().enumerate() {
            if i == worst {
                continue;
            }
            for k in 0..d {
                centroid[k] += v[k];
            }
        }
        for c in centroid.iter_mut() {
            *c /= d as f64;
        }

        let blend = |from: &[f64], towards: &[f64], t: f64| -> Vec<f64> {
            (0..d).map(|k| from[k] + t * (towards[k] - from[k])).collect()
        };

        // Reflection of the worst vertex through the centroid.
        let reflected = blend(&centroid, &vertices[worst], -1.0);
        let f_reflected = eval(&reflected, &mut evaluations);

        if f_reflected > values[best] {
            let expanded = blend(&centroid, &vertices[worst], -2.0);
            let f_expanded = eval(&expanded, &mut evaluations);
            if f_expanded > f_reflected {
                vertices[worst] = expanded;
                values[worst] = f_expanded;
            } else {
                vertices[worst] = reflected;
                values[worst] = f_reflected;
            }
            continue;
        }
        if f_reflected > values[second_worst] {
            vertices[worst] = reflected;
            values[worst] = f_reflected;
            continue;
        }

        // Contraction: outside if the reflection at least beat the worst
        // vertex, inside otherwise.
        let (contracted, reference) = if f_reflected > values[worst] {
            (blend(&centroid, &reflected, 0.5), f_reflected)
        } else {
            (blend(&centroid, &vertices[worst], 0.5), values[worst])
        };
        let f_contracted = eval(&contracted, &mut evaluations);
        if f_contracted > reference {
            vertices[worst] = contracted;
            values[worst] = f_contracted;
            continue;
        }

        // Shrink everything towards the best vertex; the best one stays,
        // so the running maximum can never regress.
        let anchor = vertices[best].clone();
        for i in 0..=d {
            if i == best {
                continue;
            }
            vertices[i] = blend(&anchor, &vertices[i], 0.5);
            values[i] = eval(&vertices[i], &mut evaluations);
        }
    }

    let mut best = 0;
    for i in 1..=d {
        if values[i] > values[best] {
            best = i;
        }
    }
    Ok(OptimizationResult {
        best_value: values[best],
        best_settings: MeasurementSettings::from_flat(&vertices[best]),
        trace,
        evaluations,
        terminated,
    })
}

/// Derivative-free local refinement of `start`. Builds a simplex with one
/// vertex per angle offset by 0.05 and runs Nelder-Mead (reflection 1,
/// expansion 2, contraction 0.5, shrink 0.5) until the value spread falls
/// below `tol` or the iteration cap of 2000 per party is hit. The best
/// vertex is never discarded, so the returned value is at least the value
/// at `start`.
pub fn simplex_refine(
    rho: &DensityMatrix,
    list: &BellTermList,
    start: &MeasurementSettings,
    tol: f64,
) -> Result<OptimizationResult, AnnealError> {
    let objective = Objective::new(rho, list)?;
    refine_with(&objective, start, tol)
}

// ── Grid scan ────────────────────────────────────────────────────────────

/// Grid scan over an objective; also returns the best value and the
/// number of evaluations spent.
fn grid_scan(
    objective: &Objective,
    resolution: usize,
) -> Result<(MeasurementSettings, f64, u64), AnnealError> {
    use std::f64::consts::PI;
    let n = objective.n_parties();
    let r = resolution;
    if r == 0 || r > GRID_MAX_RESOLUTION || n > GRID_MAX_PARTIES {
        return Err(AnnealError::GridTooLarge {
            parties: n,
            resolution: r,
            max_parties: GRID_MAX_PARTIES,
            max_resolution: GRID_MAX_RESOLUTION,
        });
    }

    let thetas: Vec<f64> = (0..r).map(|i| PI * (i as f64 + 0.5) / r as f64).collect();
    let phis: Vec<f64> = (0..r).map(|j| 2.0 * PI * j as f64 / r as f64).collect();
    // One digit per direction pair (theta, phi), base r^2.
    let rr = r * r;
    let pairs = 2 * n;
    let combos = rr
        .checked_pow(pairs as u32)
        .expect("grid size fits in usize within the guarded limits");
    let table: Vec<[f64; 3]> = (0..rr)
        .map(|d| SettingAngles::new(thetas[d / r], phis[d % r]).vector())
        .collect();

    let tensor = objective
        .tensor
        .as_ref()
        .expect("grid party counts always precompute the tensor");
    let mut vectors = vec![[[0.0f64; 3]; 2]; n];
    let mut scratch = Vec::new();
    let mut digits = vec![0usize; pairs];
    let mut best_value = f64::NEG_INFINITY;
    let mut best_digits = digits.clone();
    for code in 0..combos {
        let mut c = code;
        for p in 0..pairs {
            digits[p] = c % rr;
            c /= rr;
            vectors[p / 2][p % 2] = table[digits[p]];
        }
        let v = value_from_vectors(tensor, objective.list, &vectors, &mut scratch);
        if v > best_value {
            best_value = v;
            best_digits.copy_from_slice(&digits);
        }
    }

    let parties: Vec<PartySettings> = (0..n)
        .map(|j| {
            let angles = |d: usize| SettingAngles::new(thetas[d / r], phis[d % r]);
            PartySettings {
                a: angles(best_digits[2 * j]),
                b: angles(best_digits[2 * j + 1]),
            }
        })
        .collect();
    Ok((
        MeasurementSettings::new(parties),
        best_value,
        combos as u64,
    ))
}

/// Exhaustive scan over a coarse angle grid: theta takes the midpoints
/// pi (i + 1/2) / r and phi the points 2 pi j / r, independently for every
/// one of the 2N directions, costing r^(4N) evaluations. Only small party
/// counts and resolutions are accepted. Returns the best gridpoint.
pub fn grid_seed(
    rho: &DensityMatrix,
    list: &BellTermList,
    resolution: usize,
) -> Result<MeasurementSettings, AnnealError> {
    let objective = Objective::new(rho, list)?;
    let (settings, _, _) = grid_scan(&objective, resolution)?;
    Ok(settings)
}

// ── Restart driver ───────────────────────────────────────────────────────

/// Deterministic per-restart stream seed derived from the base seed.
pub fn restart_seed(base_seed: u64, restart: usize) -> u64 {
    // SplitMix64 finalizer over the (seed, index) pair.
    let mut z = base_seed ^ 0x9E3779B97F4A7C15u64.wrapping_mul(restart as u64 + 1);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Multi-restart maximization of Tr(rho B) over all measurement angles
/// for one of the named operator families. Each restart draws its own
/// starting point from a stream seeded by [`restart_seed`], anneals, then
/// polishes with a Nelder-Mead pass. The best restart wins (the earliest
/// one on exact ties); `evaluations` sums over all restarts, and the
/// trace is the winning restart's annealing trace.
pub fn maximize(
    rho: &DensityMatrix,
    family: BellFamily,
    restarts: usize,
    schedule: &AnnealSchedule,
    base_seed: u64,
) -> Result<OptimizationResult, AnnealError> {
    if restarts == 0 {
        return Err(AnnealError::NoRestarts);
    }
    schedule.validate()?;
    let list = family.term_list()?;
    let objective = Objective::new(rho, &list)?;

    let mut winner: Option<OptimizationResult> = None;
    let mut total_evaluations: u64 = 0;
    for i in 0..restarts {
        let mut rng = ChaCha12Rng::seed_from_u64(restart_seed(base_seed, i));
        let init = MeasurementSettings::random(objective.n_parties(), &mut rng);
        let mut run = run_chain(&objective, &init, schedule, &mut rng);
        let refined = refine_with(&objective, &run.best_settings, REFINE_TOL)?;
        run.evaluations += refined.evaluations;
        if refined.best_value > run.best_value {
            run.best_value = refined.best_value;
            run.best_settings = refined.best_settings;
        }
        total_evaluations += run.evaluations;
        let better = match &winner {
            None => true,
            Some(w) => run.best_value > w.best_value,
        };
        if better {
            winner = Some(run);
        }
    }
    let mut out = winner.expect("at least one restart ran");
    out.evaluations = total_evaluations;
    Ok(out)
}
