//! Dense complex linear algebra for few-qubit operators.
//!
//! Everything here is sized for operators on at most a handful of qubits:
//! matrices are stored dense in row-major order, and the qubit-count guard
//! in [`crate::limits`] keeps dimensions below 2^N for the configured N.
//! Party 0 always owns the most significant qubit, i.e. the leftmost factor
//! of a Kronecker product.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;
use nalgebra::linalg::SymmetricEigen;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::limits;

pub type Complex64 = num_complex::Complex<f64>;

/// Hermiticity and trace tolerance used by the library constructors.
pub const DENSITY_TOL: f64 = 1e-12;

/// Positive-semidefiniteness is checked at 100x the base tolerance, so the
/// default minimum eigenvalue floor is -1e-10.
pub const PSD_TOL_FACTOR: f64 = 100.0;

#[derive(Debug, Error)]
pub enum QlinalgError {
    #[error("qubit count {n} outside supported range {min}..={max}")]
    QubitCount { n: usize, min: usize, max: usize },
    #[error("matrix dimension {dim} exceeds the configured ceiling {max_dim}")]
    ResourceLimit { dim: usize, max_dim: usize },
    #[error("expected dimension {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),
    #[error("matrix is not a valid density matrix:\n{0}")]
    InvalidDensity(ValidationReport),
}

// ── Complex matrices ─────────────────────────────────────────────────────

/// Dense square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    entries: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be at least 1");
        ComplexMatrix {
            dim,
            entries: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    /// Builds a matrix from rows of (re, im) pairs; panics on ragged input.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Self {
        let dim = rows.len();
        let mut m = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), dim, "row {i} has wrong length");
            for (j, v) in row.iter().enumerate() {
                m.set(i, j, *v);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.entries[row * self.dim + col] = value;
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn scale(&mut self, factor: Complex64) {
        for e in &mut self.entries {
            *e *= factor;
        }
    }

    /// self += factor * other
    pub fn add_scaled(&mut self, factor: Complex64, other: &Self) {
        assert_eq!(self.dim, other.dim, "dimension mismatch in add_scaled");
        for (a, b) in self.entries.iter_mut().zip(other.entries.iter()) {
            *a += factor * b;
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch in matmul");
        let d = self.dim;
        let mut out = Self::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self.get(i, k);
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..d {
                    let v = out.get(i, j) + a * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    /// Largest deviation from Hermitian symmetry, max |m[i][j] - conj(m[j][i])|.
    pub fn hermiticity_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in i..self.dim {
                let r = (self.get(i, j) - self.get(j, i).conj()).norm();
                worst = worst.max(r);
            }
        }
        worst
    }

    /// Largest entrywise distance to another matrix of the same dimension.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch in max_abs_diff");
        self.entries
            .iter()
            .zip(other.entries.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Eigenvalues of the Hermitian part (m + m^dagger)/2, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let d = self.dim;
        let m = DMatrix::from_fn(d, d, |r, c| {
            0.5 * (self.get(r, c) + self.get(c, r).conj())
        });
        let eig = SymmetricEigen::new(m);
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(f64::total_cmp);
        vals
    }
}

/// Kronecker product; `a` owns the most significant block index.
///
/// Fails when the product dimension would exceed the configured qubit
/// ceiling (2^max_qubits).
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix, QlinalgError> {
    let dim = a.dim * b.dim;
    let max_dim = 1usize << limits::max_qubits();
    if dim > max_dim {
        return Err(QlinalgError::ResourceLimit { dim, max_dim });
    }
    Ok(kron_unchecked(a, b))
}

pub(crate) fn kron_unchecked(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (da, db) = (a.dim, b.dim);
    let mut out = ComplexMatrix::zeros(da * db);
    for ia in 0..da {
        for ja in 0..da {
            let f = a.get(ia, ja);
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            for ib in 0..db {
                for jb in 0..db {
                    out.set(ia * db + ib, ja * db + jb, f * b.get(ib, jb));
                }
            }
        }
    }
    out
}

// ── Pauli operators and measurement directions ───────────────────────────

/// The three Pauli axes, indexed 0, 1, 2 in correlation tensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

impl PauliAxis {
    pub const ALL: [PauliAxis; 3] = [PauliAxis::X, PauliAxis::Y, PauliAxis::Z];

    pub fn index(self) -> usize {
        match self {
            PauliAxis::X => 0,
            PauliAxis::Y => 1,
            PauliAxis::Z => 2,
        }
    }

    pub fn from_index(i: usize) -> Self {
        match i {
            0 => PauliAxis::X,
            1 => PauliAxis::Y,
            2 => PauliAxis::Z,
            _ => panic!("Pauli axis index {i} out of range"),
        }
    }
}

/// The 2x2 Pauli matrix on the given axis.
pub fn pauli(axis: PauliAxis) -> ComplexMatrix {
    let o = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    let rows = match axis {
        PauliAxis::X => [[o, one], [one, o]],
        PauliAxis::Y => [[o, -i], [i, o]],
        PauliAxis::Z => [[one, o], [o, -one]],
    };
    ComplexMatrix::from_rows(&[rows[0].to_vec(), rows[1].to_vec()])
}

/// One measurement direction in spherical angles: theta in [0, pi],
/// phi stored canonically in [0, 2*pi).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SettingAngles {
    theta: f64,
    phi: f64,
}

impl SettingAngles {
    /// Panics if theta is outside [0, pi] or either angle is not finite.
    /// phi may be any finite value and is wrapped into [0, 2*pi).
    pub fn new(theta: f64, phi: f64) -> Self {
        assert!(
            theta.is_finite() && phi.is_finite(),
            "angles must be finite"
        );
        assert!(
            (0.0..=PI).contains(&theta),
            "theta {theta} outside [0, pi]"
        );
        let mut phi = phi.rem_euclid(2.0 * PI);
        if phi >= 2.0 * PI {
            phi = 0.0;
        }
        SettingAngles { theta, phi }
    }

    /// Maps arbitrary finite angles onto the canonical domain: theta is
    /// reflected back into [0, pi] (sawtooth), phi is wrapped mod 2*pi.
    pub fn normalized(theta: f64, phi: f64) -> Self {
        Self::new(reflect_theta(theta), phi)
    }

    pub fn theta(self) -> f64 {
        self.theta
    }

    pub fn phi(self) -> f64 {
        self.phi
    }

    /// Unit vector (sin t cos p, sin t sin p, cos t).
    pub fn vector(self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }
}

/// Reflects an arbitrary angle into [0, pi] without changing continuity
/// at the boundaries (sawtooth reflection).
pub(crate) fn reflect_theta(theta: f64) -> f64 {
    let t = theta.rem_euclid(2.0 * PI);
    if t > PI { 2.0 * PI - t } else { t }
}

/// The observable v . sigma for the direction v given by the angles:
/// sin t cos p * X + sin t sin p * Y + cos t * Z.
pub fn pauli_obs(s: SettingAngles) -> ComplexMatrix {
    let [vx, vy, vz] = s.vector();
    let mut m = ComplexMatrix::zeros(2);
    m.set(0, 0, Complex64::new(vz, 0.0));
    m.set(0, 1, Complex64::new(vx, -vy));
    m.set(1, 0, Complex64::new(vx, vy));
    m.set(1, 1, Complex64::new(-vz, 0.0));
    m
}

// ── Density matrices ─────────────────────────────────────────────────────

/// Validation outcome for a would-be density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub n_qubits: usize,
    pub failures: Vec<InvariantFailure>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InvariantFailure {
    Dimension { expected: usize, actual: usize },
    Hermiticity { residual: f64, tol: f64 },
    Trace { residual: f64, tol: f64 },
    Positivity { min_eigenvalue: f64, floor: f64 },
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.failures.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.failures.is_empty() {
            return write!(f, "valid {}-qubit density matrix", self.n_qubits);
        }
        for (k, failure) in self.failures.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            match failure {
                InvariantFailure::Dimension { expected, actual } => {
                    write!(f, "dimension {actual} does not match expected {expected}")?
                }
                InvariantFailure::Hermiticity { residual, tol } => {
                    write!(f, "hermiticity residual {residual:e} exceeds {tol:e}")?
                }
                InvariantFailure::Trace { residual, tol } => {
                    write!(f, "trace residual {residual:e} exceeds {tol:e}")?
                }
                InvariantFailure::Positivity {
                    min_eigenvalue,
                    floor,
                } => write!(
                    f,
                    "minimum eigenvalue {min_eigenvalue:e} below floor {floor:e}"
                )?,
            }
        }
        Ok(())
    }
}

/// Checks the density-matrix invariants and reports every violation with
/// its measured residual. Hermiticity and trace use `tol` directly; the
/// eigenvalue floor for positivity is `-PSD_TOL_FACTOR * tol`.
pub fn validate_density(m: &ComplexMatrix, n_qubits: usize, tol: f64) -> ValidationReport {
    let expected = 1usize << n_qubits;
    let mut failures = Vec::new();
    if m.dim() != expected {
        failures.push(InvariantFailure::Dimension {
            expected,
            actual: m.dim(),
        });
        // The remaining checks assume the declared dimension.
        return ValidationReport { n_qubits, failures };
    }
    let herm = m.hermiticity_residual();
    if herm > tol {
        failures.push(InvariantFailure::Hermiticity {
            residual: herm,
            tol,
        });
    }
    let trace_residual = (m.trace() - Complex64::new(1.0, 0.0)).norm();
    if trace_residual > tol {
        failures.push(InvariantFailure::Trace {
            residual: trace_residual,
            tol,
        });
    }
    let floor = -PSD_TOL_FACTOR * tol;
    let min_eig = m
        .hermitian_eigenvalues()
        .first()
        .copied()
        .unwrap_or(f64::NAN);
    if min_eig < floor || min_eig.is_nan() {
        failures.push(InvariantFailure::Positivity {
            min_eigenvalue: min_eig,
            floor,
        });
    }
    ValidationReport { n_qubits, failures }
}

/// An N-qubit state: Hermitian, unit-trace, positive-semidefinite matrix
/// of dimension 2^N, validated at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates at the library tolerance (1e-12, eigenvalue floor -1e-10).
    pub fn new(n_qubits: usize, matrix: ComplexMatrix) -> Result<Self, QlinalgError> {
        Self::with_tolerance(n_qubits, matrix, DENSITY_TOL)
    }

    /// Validates at a caller-chosen tolerance; used when accepting states
    /// that round-tripped through a file.
    pub fn with_tolerance(
        n_qubits: usize,
        matrix: ComplexMatrix,
        tol: f64,
    ) -> Result<Self, QlinalgError> {
        let report = validate_density(&matrix, n_qubits, tol);
        if !report.is_valid() {
            return Err(QlinalgError::InvalidDensity(report));
        }
        Ok(DensityMatrix { n_qubits, matrix })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// Tr(rho^2); equals the squared Frobenius norm for Hermitian input.
    pub fn purity(&self) -> f64 {
        self.matrix.entries().iter().map(|e| e.norm_sqr()).sum()
    }
}

/// The N-qubit GHZ state (|0...0> + |1...1>)/sqrt(2) as a density matrix.
pub fn ghz(n_qubits: usize) -> Result<DensityMatrix, QlinalgError> {
    let max = limits::max_qubits();
    if n_qubits < 2 || n_qubits > max {
        return Err(QlinalgError::QubitCount {
            n: n_qubits,
            min: 2,
            max,
        });
    }
    let dim = 1usize << n_qubits;
    let mut m = ComplexMatrix::zeros(dim);
    let h = Complex64::new(0.5, 0.0);
    m.set(0, 0, h);
    m.set(0, dim - 1, h);
    m.set(dim - 1, 0, h);
    m.set(dim - 1, dim - 1, h);
    DensityMatrix::new(n_qubits, m)
}

/// A random mixed state G G^dagger / Tr(G G^dagger) with G a square matrix
/// of standard complex Gaussians drawn from a stream seeded by `seed`.
/// The same seed always reproduces the same state.
pub fn random_density(n_qubits: usize, seed: u64) -> Result<DensityMatrix, QlinalgError> {
    let max = limits::max_qubits();
    if n_qubits < 1 || n_qubits > max {
        return Err(QlinalgError::QubitCount {
            n: n_qubits,
            min: 1,
            max,
        });
    }
    let dim = 1usize << n_qubits;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut g = ComplexMatrix::zeros(dim);
    for i in 0..dim {
        for j in 0..dim {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            g.set(i, j, Complex64::new(re, im));
        }
    }
    let mut rho = ComplexMatrix::zeros(dim);
    for i in 0..dim {
        for j in 0..dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..dim {
                acc += g.get(i, k) * g.get(j, k).conj();
            }
            rho.set(i, j, acc);
        }
    }
    let trace = rho.trace().re;
    rho.scale(Complex64::new(1.0 / trace, 0.0));
    DensityMatrix::new(n_qubits, rho)
}

/// A diagonal (classical) state from a probability vector of length 2^N.
pub fn diag_density(probs: &[f64], n_qubits: usize) -> Result<DensityMatrix, QlinalgError> {
    let max = limits::max_qubits();
    if n_qubits < 1 || n_qubits > max {
        return Err(QlinalgError::QubitCount {
            n: n_qubits,
            min: 1,
            max,
        });
    }
    let dim = 1usize << n_qubits;
    if probs.len() != dim {
        return Err(QlinalgError::InvalidProbabilities(format!(
            "expected {dim} entries, got {}",
            probs.len()
        )));
    }
    if let Some(p) = probs.iter().find(|p| **p < 0.0 || p.is_nan()) {
        return Err(QlinalgError::InvalidProbabilities(format!(
            "negative entry {p}"
        )));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > DENSITY_TOL {
        return Err(QlinalgError::InvalidProbabilities(format!(
            "entries sum to {sum}, not 1"
        )));
    }
    let mut m = ComplexMatrix::zeros(dim);
    for (i, p) in probs.iter().enumerate() {
        m.set(i, i, Complex64::new(*p, 0.0));
    }
    DensityMatrix::new(n_qubits, m)
}

// ── Correlation tensors ──────────────────────────────────────────────────

/// Expectation Tr(rho P) of an N-qubit Pauli string without forming the
/// 2^N x 2^N string: each string row has exactly one nonzero entry, so the
/// trace is a single sum over basis columns.
pub(crate) fn pauli_expectation(m: &ComplexMatrix, axes: &[PauliAxis]) -> Complex64 {
    let n = axes.len();
    let dim = 1usize << n;
    debug_assert_eq!(m.dim(), dim);
    let mut flip = 0usize;
    for (k, axis) in axes.iter().enumerate() {
        if !matches!(axis, PauliAxis::Z) {
            flip |= 1 << (n - 1 - k);
        }
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..dim {
        let mut v = Complex64::new(1.0, 0.0);
        for (k, axis) in axes.iter().enumerate() {
            let bit = (j >> (n - 1 - k)) & 1;
            v *= match axis {
                PauliAxis::X => Complex64::new(1.0, 0.0),
                PauliAxis::Y => {
                    if bit == 0 {
                        Complex64::new(0.0, -1.0)
                    } else {
                        Complex64::new(0.0, 1.0)
                    }
                }
                PauliAxis::Z => {
                    if bit == 0 {
                        Complex64::new(1.0, 0.0)
                    } else {
                        Complex64::new(-1.0, 0.0)
                    }
                }
            };
        }
        acc += m.get(j ^ flip, j) * v;
    }
    acc
}

/// All 3^N Pauli-string expectations of a state, indexed by one axis per
/// party with party 0 as the most significant digit.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTensor {
    n_qubits: usize,
    values: Vec<f64>,
}

impl CorrelationTensor {
    pub fn from_density(rho: &DensityMatrix) -> Result<Self, QlinalgError> {
        let n = rho.n_qubits();
        let max = limits::max_qubits();
        if n > max {
            return Err(QlinalgError::QubitCount { n, min: 1, max });
        }
        let len = 3usize.pow(n as u32);
        let mut values = vec![0.0f64; len];
        let mut axes = vec![PauliAxis::X; n];
        for (flat, slot) in values.iter_mut().enumerate() {
            let mut rest = flat;
            for k in (0..n).rev() {
                axes[k] = PauliAxis::from_index(rest % 3);
                rest /= 3;
            }
            let e = pauli_expectation(rho.matrix(), &axes);
            debug_assert!(
                e.im.abs() <= 1e-10,
                "Pauli expectation has imaginary residue {}",
                e.im
            );
            *slot = e.re;
        }
        Ok(CorrelationTensor {
            n_qubits: n,
            values,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Entry for one axis index (0 = X, 1 = Y, 2 = Z) per party.
    pub fn get(&self, axis_indices: &[usize]) -> f64 {
        assert_eq!(axis_indices.len(), self.n_qubits, "wrong index rank");
        let mut flat = 0usize;
        for &i in axis_indices {
            assert!(i < 3, "axis index {i} out of range");
            flat = flat * 3 + i;
        }
        self.values[flat]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Dense reference for Pauli-string expectations: form the full
    /// Kronecker product and take Tr(rho P) entry by entry.
    fn pauli_expectation_dense(m: &ComplexMatrix, axes: &[PauliAxis]) -> Complex64 {
        let mut p = pauli(axes[0]);
        for axis in &axes[1..] {
            p = kron_unchecked(&p, &pauli(*axis));
        }
        let d = m.dim();
        let mut acc = c(0.0, 0.0);
        for i in 0..d {
            for j in 0..d {
                acc += m.get(i, j) * p.get(j, i);
            }
        }
        acc
    }

    #[test]
    fn kron_of_x_and_z_matches_hand_expansion() {
        let got = kron(&pauli(PauliAxis::X), &pauli(PauliAxis::Z)).unwrap();
        let want = ComplexMatrix::from_rows(&[
            vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)],
            vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
        ]);
        assert_eq!(got, want);
    }

    #[test]
    fn kron_rejects_dimensions_beyond_the_ceiling() {
        let big = ComplexMatrix::identity(1 << 6);
        let bigger = ComplexMatrix::identity(1 << 5);
        let err = kron(&big, &bigger).unwrap_err();
        assert!(matches!(err, QlinalgError::ResourceLimit { .. }));
    }

    #[test]
    fn pauli_observable_hits_the_axes() {
        let z = pauli_obs(SettingAngles::new(0.0, 0.0));
        assert!(z.max_abs_diff(&pauli(PauliAxis::Z)) < 1e-15);
        let x = pauli_obs(SettingAngles::new(PI / 2.0, 0.0));
        assert!(x.max_abs_diff(&pauli(PauliAxis::X)) < 1e-15);
        let y = pauli_obs(SettingAngles::new(PI / 2.0, PI / 2.0));
        assert!(y.max_abs_diff(&pauli(PauliAxis::Y)) < 1e-15);
    }

    #[test]
    fn pauli_observable_squares_to_identity() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let id = ComplexMatrix::identity(2);
        for _ in 0..1000 {
            let s = SettingAngles::new(
                rng.random_range(0.0..=PI),
                rng.random_range(0.0..2.0 * PI),
            );
            let m = pauli_obs(s);
            let sq = m.matmul(&m);
            assert!(
                sq.max_abs_diff(&id) < 1e-14,
                "square deviates at theta={} phi={}",
                s.theta(),
                s.phi()
            );
        }
    }

    #[test]
    fn pauli_observable_eigenvalues_are_plus_minus_one() {
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        for _ in 0..50 {
            let s = SettingAngles::new(
                rng.random_range(0.0..=PI),
                rng.random_range(0.0..2.0 * PI),
            );
            let eig = pauli_obs(s).hermitian_eigenvalues();
            assert_abs_diff_eq!(eig[0], -1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(eig[1], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn setting_angles_wrap_phi_and_keep_unit_vectors() {
        let a = SettingAngles::new(1.0, 7.0);
        assert!((0.0..2.0 * PI).contains(&a.phi()));
        let b = SettingAngles::new(1.0, 7.0 - 2.0 * PI);
        assert_abs_diff_eq!(a.phi(), b.phi(), epsilon = 1e-15);
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        for _ in 0..200 {
            let s = SettingAngles::normalized(
                rng.random_range(-10.0..10.0),
                rng.random_range(-10.0..10.0),
            );
            let [x, y, z] = s.vector();
            let norm = (x * x + y * y + z * z).sqrt();
            assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn theta_reflection_folds_excursions_back() {
        assert_abs_diff_eq!(reflect_theta(-0.2), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(reflect_theta(PI + 0.3), PI - 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(reflect_theta(0.7), 0.7, epsilon = 1e-15);
    }

    #[test]
    fn ghz_two_qubits_has_half_weight_corners() {
        let rho = ghz(2).unwrap();
        let m = rho.matrix();
        assert_abs_diff_eq!(m.get(0, 0).re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(m.get(0, 3).re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(m.get(3, 0).re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(m.get(3, 3).re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(rho.purity(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ghz_rejects_out_of_range_sizes() {
        assert!(matches!(ghz(1), Err(QlinalgError::QubitCount { .. })));
        assert!(matches!(ghz(99), Err(QlinalgError::QubitCount { .. })));
    }

    #[test]
    fn ghz_correlation_tensor_is_diag_one_minus_one_one() {
        let t = CorrelationTensor::from_density(&ghz(2).unwrap()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = match (i, j) {
                    (0, 0) => 1.0,
                    (1, 1) => -1.0,
                    (2, 2) => 1.0,
                    _ => 0.0,
                };
                assert_abs_diff_eq!(t.get(&[i, j]), want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn correlation_tensor_matches_dense_reference() {
        for n in 2..=4usize {
            let rho = random_density(n, 1000 + n as u64).unwrap();
            let t = CorrelationTensor::from_density(&rho).unwrap();
            let mut axes = vec![PauliAxis::X; n];
            for flat in 0..3usize.pow(n as u32) {
                let mut rest = flat;
                for k in (0..n).rev() {
                    axes[k] = PauliAxis::from_index(rest % 3);
                    rest /= 3;
                }
                let dense = pauli_expectation_dense(rho.matrix(), &axes);
                assert_abs_diff_eq!(t.values()[flat], dense.re, epsilon = 1e-12);
                assert!(dense.im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn random_density_is_seed_deterministic() {
        let a = random_density(3, 42).unwrap();
        let b = random_density(3, 42).unwrap();
        assert_eq!(a.matrix(), b.matrix());
        let c = random_density(3, 43).unwrap();
        assert!(a.matrix().max_abs_diff(c.matrix()) > 1e-3);
    }

    #[test]
    fn validate_accepts_maximally_mixed_two_qubit_state() {
        let mut m = ComplexMatrix::identity(4);
        m.scale(c(0.25, 0.0));
        let report = validate_density(&m, 2, DENSITY_TOL);
        assert!(report.is_valid(), "unexpected failures: {report}");
    }

    #[test]
    fn validate_reports_trace_excess() {
        let m = ComplexMatrix::identity(2);
        let report = validate_density(&m, 1, DENSITY_TOL);
        assert!(report
            .failures
            .iter()
            .any(|f| matches!(f, InvariantFailure::Trace { residual, .. }
                if (residual - 1.0).abs() < 1e-12)));
    }

    #[test]
    fn validate_reports_negative_eigenvalue() {
        let mut m = ComplexMatrix::zeros(2);
        m.set(0, 0, c(1.5, 0.0));
        m.set(1, 1, c(-0.5, 0.0));
        let report = validate_density(&m, 1, DENSITY_TOL);
        assert!(report
            .failures
            .iter()
            .any(|f| matches!(f, InvariantFailure::Positivity { min_eigenvalue, .. }
                if (min_eigenvalue + 0.5).abs() < 1e-12)));
    }

    #[test]
    fn validate_reports_dimension_mismatch_alone() {
        let m = ComplexMatrix::identity(3);
        let report = validate_density(&m, 2, DENSITY_TOL);
        assert_eq!(report.failures.len(), 1);
        assert!(matches!(
            report.failures[0],
            InvariantFailure::Dimension {
                expected: 4,
                actual: 3
            }
        ));
    }

    #[test]
    fn diag_density_rejects_bad_vectors() {
        assert!(diag_density(&[0.5, 0.5, 0.0], 1).is_err());
        assert!(diag_density(&[0.7, 0.4], 1).is_err());
        assert!(diag_density(&[1.2, -0.2], 1).is_err());
        assert!(diag_density(&[0.25; 4], 2).is_ok());
    }
}
