//! Symbolic Bell expressions over per-party measurement choices.
//!
//! A Bell expression on N parties is a signed sum of full correlation
//! terms. Each term picks, for every party j, one of that party's two
//! measurement directions: choice A (the direction `a_j`) or choice B
//! (the direction `b_j`). The expression is stored symbolically as
//! (coefficient, pattern) pairs and only turns into a dense operator once
//! concrete directions are supplied.
//!
//! Two normalization conventions coexist. The named three- and four-party
//! operators are kept in their literal textbook form. The recursive family
//! starts from CHSH and adds one party at a time with a factor 1/2, which
//! keeps the classical bound at 2 for every size while the quantum maximum
//! grows as 2^((N+1)/2).

use std::fmt;

use thiserror::Error;

use crate::limits;
use crate::qlinalg::{
    kron_unchecked, pauli_obs, ComplexMatrix, Complex64, CorrelationTensor, DensityMatrix,
    QlinalgError, SettingAngles,
};

/// Coefficients at or below this magnitude are dropped by canonicalize.
pub const COEFF_EPS: f64 = 1e-14;

#[derive(Debug, Error)]
pub enum BellopsError {
    #[error("party count {n} outside supported range {min}..={max}")]
    PartyCount { n: usize, min: usize, max: usize },
    #[error("expected an object on {expected} parties, got {actual}")]
    PartyMismatch { expected: usize, actual: usize },
    #[error("term {index}: pattern length {len} does not match {expected} parties")]
    BadPattern {
        index: usize,
        len: usize,
        expected: usize,
    },
    #[error("term {index}: coefficient is not finite")]
    BadCoefficient { index: usize },
    #[error(transparent)]
    Linalg(#[from] QlinalgError),
}

/// Which of a party's two measurement directions a term uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Choice {
    A,
    B,
}

impl Choice {
    pub fn flipped(self) -> Self {
        match self {
            Choice::A => Choice::B,
            Choice::B => Choice::A,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Choice::A => 'A',
            Choice::B => 'B',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'A' => Some(Choice::A),
            'B' => Some(Choice::B),
            _ => None,
        }
    }
}

/// One full correlation term: a coefficient and one choice per party.
#[derive(Debug, Clone, PartialEq)]
pub struct BellTerm {
    pub coefficient: f64,
    pub pattern: Vec<Choice>,
}

impl BellTerm {
    pub fn new(coefficient: f64, pattern: Vec<Choice>) -> Self {
        BellTerm {
            coefficient,
            pattern,
        }
    }

    pub fn pattern_string(&self) -> String {
        self.pattern.iter().map(|c| c.as_char()).collect()
    }
}

/// Parses a pattern like "AAB" into per-party choices.
pub fn pattern_from_str(s: &str) -> Option<Vec<Choice>> {
    s.chars().map(Choice::from_char).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// Built through the 1/2-weighted recursion; classical bound 2.
    RecursionNormalized,
    /// Textbook coefficients taken as written.
    Literal,
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Normalization::RecursionNormalized => write!(f, "recursion-normalized"),
            Normalization::Literal => write!(f, "literal"),
        }
    }
}

/// A symbolic Bell expression.
#[derive(Debug, Clone, PartialEq)]
pub struct BellTermList {
    n_parties: usize,
    terms: Vec<BellTerm>,
    name: String,
    classical_bound: Option<f64>,
    normalization: Normalization,
}

impl BellTermList {
    /// Assembles a list from parts, checking pattern lengths and
    /// coefficient finiteness. The terms are taken as given; call
    /// [`BellTermList::canonicalize`] to merge and sort them.
    pub fn from_parts(
        n_parties: usize,
        terms: Vec<BellTerm>,
        name: impl Into<String>,
        classical_bound: Option<f64>,
        normalization: Normalization,
    ) -> Result<Self, BellopsError> {
        if n_parties < 2 {
            return Err(BellopsError::PartyCount {
                n: n_parties,
                min: 2,
                max: limits::max_qubits(),
            });
        }
        for (index, t) in terms.iter().enumerate() {
            if t.pattern.len() != n_parties {
                return Err(BellopsError::BadPattern {
                    index,
                    len: t.pattern.len(),
                    expected: n_parties,
                });
            }
            if !t.coefficient.is_finite() {
                return Err(BellopsError::BadCoefficient { index });
            }
        }
        Ok(BellTermList {
            n_parties,
            terms,
            name: name.into(),
            classical_bound,
            normalization,
        })
    }

    pub fn n_parties(&self) -> usize {
        self.n_parties
    }

    pub fn terms(&self) -> &[BellTerm] {
        &self.terms
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn classical_bound(&self) -> Option<f64> {
        self.classical_bound
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    /// Swaps choice A and choice B for every party in every term.
    /// Applying it twice restores the original list.
    pub fn prime(&self) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                BellTerm::new(
                    t.coefficient,
                    t.pattern.iter().map(|c| c.flipped()).collect(),
                )
            })
            .collect();
        BellTermList {
            n_parties: self.n_parties,
            terms,
            name: self.name.clone(),
            classical_bound: self.classical_bound,
            normalization: self.normalization,
        }
    }

    /// Merges identical patterns, drops coefficients with magnitude at or
    /// below [`COEFF_EPS`], and sorts patterns lexicographically (A < B).
    pub fn canonicalize(&self) -> Self {
        let mut terms = self.terms.clone();
        terms.sort_by(|x, y| x.pattern.cmp(&y.pattern));
        let mut merged: Vec<BellTerm> = Vec::with_capacity(terms.len());
        for t in terms {
            match merged.last_mut() {
                Some(last) if last.pattern == t.pattern => last.coefficient += t.coefficient,
                _ => merged.push(t),
            }
        }
        merged.retain(|t| t.coefficient.abs() > COEFF_EPS);
        BellTermList {
            n_parties: self.n_parties,
            terms: merged,
            name: self.name.clone(),
            classical_bound: self.classical_bound,
            normalization: self.normalization,
        }
    }

    /// Adds one party at the front of every pattern. With u the new
    /// party's A direction, u' its B direction, and t' the swapped list,
    /// the result is ((u + u') x t + (u - u') x t') / 2, canonicalized.
    /// The 1/2 keeps the classical bound of the input.
    pub fn extend(&self) -> Self {
        let base = self.canonicalize();
        let primed = base.prime();
        let n = self.n_parties + 1;
        let mut terms = Vec::with_capacity(4 * base.terms.len());
        let mut push = |lead: Choice, coefficient: f64, tail: &[Choice]| {
            let mut pattern = Vec::with_capacity(n);
            pattern.push(lead);
            pattern.extend_from_slice(tail);
            terms.push(BellTerm::new(coefficient, pattern));
        };
        for t in &base.terms {
            push(Choice::A, t.coefficient / 2.0, &t.pattern);
            push(Choice::B, t.coefficient / 2.0, &t.pattern);
        }
        for t in &primed.terms {
            push(Choice::A, t.coefficient / 2.0, &t.pattern);
            push(Choice::B, -t.coefficient / 2.0, &t.pattern);
        }
        BellTermList {
            n_parties: n,
            terms,
            name: format!("recursion-{n}"),
            classical_bound: self.classical_bound,
            normalization: Normalization::RecursionNormalized,
        }
        .canonicalize()
    }

    /// Dense Hermitian operator for concrete measurement directions.
    pub fn assemble(&self, s: &MeasurementSettings) -> Result<ComplexMatrix, BellopsError> {
        if s.n_parties() != self.n_parties {
            return Err(BellopsError::PartyMismatch {
                expected: self.n_parties,
                actual: s.n_parties(),
            });
        }
        let max = limits::max_qubits();
        if self.n_parties > max {
            return Err(BellopsError::PartyCount {
                n: self.n_parties,
                min: 1,
                max,
            });
        }
        let obs: Vec<[ComplexMatrix; 2]> = s
            .parties()
            .iter()
            .map(|p| [pauli_obs(p.a), pauli_obs(p.b)])
            .collect();
        let dim = 1usize << self.n_parties;
        let mut acc = ComplexMatrix::zeros(dim);
        for term in &self.terms {
            let pick = |j: usize| -> &ComplexMatrix {
                match term.pattern[j] {
                    Choice::A => &obs[j][0],
                    Choice::B => &obs[j][1],
                }
            };
            let mut cur = pick(0).clone();
            for j in 1..self.n_parties {
                cur = kron_unchecked(&cur, pick(j));
            }
            acc.add_scaled(Complex64::new(term.coefficient, 0.0), &cur);
        }
        Ok(acc)
    }
}

// ── Named operators ──────────────────────────────────────────────────────

fn pat(s: &str) -> Vec<Choice> {
    pattern_from_str(s).expect("static pattern")
}

/// The two-party CHSH expression AA + AB + BA - BB; classical bound 2.
/// This is also the base of the recursive family.
pub fn chsh() -> BellTermList {
    BellTermList::from_parts(
        2,
        vec![
            BellTerm::new(1.0, pat("AA")),
            BellTerm::new(1.0, pat("AB")),
            BellTerm::new(1.0, pat("BA")),
            BellTerm::new(-1.0, pat("BB")),
        ],
        "chsh",
        Some(2.0),
        Normalization::RecursionNormalized,
    )
    .expect("static term list")
}

/// The three-party expression AAA - ABB - BAB - BBA; classical bound 2.
pub fn mermin3() -> BellTermList {
    BellTermList::from_parts(
        3,
        vec![
            BellTerm::new(1.0, pat("AAA")),
            BellTerm::new(-1.0, pat("ABB")),
            BellTerm::new(-1.0, pat("BAB")),
            BellTerm::new(-1.0, pat("BBA")),
        ],
        "mermin",
        Some(2.0),
        Normalization::Literal,
    )
    .expect("static term list")
}

/// The four-party expression with all 16 patterns, signed by the number
/// of B choices: + for 0, 3 or 4 of them, - for 1 or 2. Classical bound 4.
pub fn mabk4() -> BellTermList {
    let mut terms = Vec::with_capacity(16);
    for bits in 0..16u32 {
        let pattern: Vec<Choice> = (0..4)
            .map(|j| {
                if bits >> (3 - j) & 1 == 1 {
                    Choice::B
                } else {
                    Choice::A
                }
            })
            .collect();
        let coefficient = match bits.count_ones() {
            0 | 3 | 4 => 1.0,
            1 | 2 => -1.0,
            _ => unreachable!(),
        };
        terms.push(BellTerm::new(coefficient, pattern));
    }
    BellTermList::from_parts(4, terms, "mabk", Some(4.0), Normalization::Literal)
        .expect("static term list")
}

/// The recursion-normalized family member on `n` parties: CHSH for n = 2,
/// then one extension per additional party. Classical bound 2 throughout.
pub fn build(n: usize) -> Result<BellTermList, BellopsError> {
    let max = limits::max_qubits();
    if n < 2 || n > max {
        return Err(BellopsError::PartyCount { n, min: 2, max });
    }
    let mut list = chsh();
    for _ in 2..n {
        list = list.extend();
    }
    Ok(list)
}

/// The operator families the maximizer and the front end know by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BellFamily {
    Chsh,
    Mermin,
    Mabk,
    Recursion(usize),
}

impl BellFamily {
    pub fn n_parties(&self) -> usize {
        match self {
            BellFamily::Chsh => 2,
            BellFamily::Mermin => 3,
            BellFamily::Mabk => 4,
            BellFamily::Recursion(n) => *n,
        }
    }

    pub fn term_list(&self) -> Result<BellTermList, BellopsError> {
        match self {
            BellFamily::Chsh => Ok(chsh()),
            BellFamily::Mermin => Ok(mermin3()),
            BellFamily::Mabk => Ok(mabk4()),
            BellFamily::Recursion(n) => build(*n),
        }
    }
}

// ── Measurement settings ─────────────────────────────────────────────────

/// One party's pair of measurement directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartySettings {
    pub a: SettingAngles,
    pub b: SettingAngles,
}

/// Measurement directions for every party: 4N angles in total.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSettings {
    parties: Vec<PartySettings>,
}

impl MeasurementSettings {
    pub fn new(parties: Vec<PartySettings>) -> Self {
        assert!(!parties.is_empty(), "settings need at least one party");
        MeasurementSettings { parties }
    }

    pub fn n_parties(&self) -> usize {
        self.parties.len()
    }

    pub fn parties(&self) -> &[PartySettings] {
        &self.parties
    }

    pub fn choice(&self, party: usize, choice: Choice) -> SettingAngles {
        match choice {
            Choice::A => self.parties[party].a,
            Choice::B => self.parties[party].b,
        }
    }

    /// Uniformly random angles: theta in [0, pi], phi in [0, 2 pi).
    pub fn random<R: rand::Rng + ?Sized>(n_parties: usize, rng: &mut R) -> Self {
        use std::f64::consts::PI;
        let parties = (0..n_parties)
            .map(|_| PartySettings {
                a: SettingAngles::new(
                    rng.random_range(0.0..=PI),
                    rng.random_range(0.0..2.0 * PI),
                ),
                b: SettingAngles::new(
                    rng.random_range(0.0..=PI),
                    rng.random_range(0.0..2.0 * PI),
                ),
            })
            .collect();
        MeasurementSettings { parties }
    }

    /// Flat angle layout, party major: [a0.theta, a0.phi, b0.theta, b0.phi,
    /// a1.theta, ...]. Length 4N.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(4 * self.parties.len());
        for p in &self.parties {
            flat.extend_from_slice(&[p.a.theta(), p.a.phi(), p.b.theta(), p.b.phi()]);
        }
        flat
    }

    /// Rebuilds settings from the flat layout, folding every theta back
    /// into [0, pi] by reflection and wrapping every phi mod 2 pi.
    pub fn from_flat(flat: &[f64]) -> Self {
        assert!(
            !flat.is_empty() && flat.len().is_multiple_of(4),
            "flat settings length must be a positive multiple of 4"
        );
        let parties = flat
            .chunks_exact(4)
            .map(|c| PartySettings {
                a: SettingAngles::normalized(c[0], c[1]),
                b: SettingAngles::normalized(c[2], c[3]),
            })
            .collect();
        MeasurementSettings { parties }
    }

    /// Per-party unit vectors, A first: vectors()[j] = [a_j, b_j].
    pub(crate) fn vectors(&self) -> Vec<[[f64; 3]; 2]> {
        self.parties
            .iter()
            .map(|p| [p.a.vector(), p.b.vector()])
            .collect()
    }
}

// ── Evaluation ───────────────────────────────────────────────────────────

/// Tr(rho B) through the dense operator. The trace of a product of two
/// Hermitian matrices is real; the imaginary residue is checked against
/// 1e-10 and discarded.
pub fn value_dense(
    rho: &DensityMatrix,
    list: &BellTermList,
    s: &MeasurementSettings,
) -> Result<f64, BellopsError> {
    if rho.n_qubits() != list.n_parties() {
        return Err(BellopsError::PartyMismatch {
            expected: list.n_parties(),
            actual: rho.n_qubits(),
        });
    }
    let b = list.assemble(s)?;
    let d = rho.dim();
    let m = rho.matrix();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            acc += m.get(i, j) * b.get(j, i);
        }
    }
    assert!(
        acc.im.abs() <= 1e-10,
        "expectation has imaginary residue {}",
        acc.im
    );
    Ok(acc.re)
}

/// Tr(rho B) through the precomputed correlation tensor: for each term,
/// the tensor is contracted with one chosen unit vector per party.
pub fn value_tensor(
    tensor: &CorrelationTensor,
    list: &BellTermList,
    s: &MeasurementSettings,
) -> Result<f64, BellopsError> {
    if tensor.n_qubits() != list.n_parties() {
        return Err(BellopsError::PartyMismatch {
            expected: list.n_parties(),
            actual: tensor.n_qubits(),
        });
    }
    if s.n_parties() != list.n_parties() {
        return Err(BellopsError::PartyMismatch {
            expected: list.n_parties(),
            actual: s.n_parties(),
        });
    }
    let mut scratch = Vec::new();
    Ok(value_from_vectors(
        tensor,
        list,
        &s.vectors(),
        &mut scratch,
    ))
}

/// Hot-path kernel behind [`value_tensor`]: evaluation from prebuilt unit
/// vectors, reusing a caller-owned scratch buffer. Contracts the tensor
/// party by party from the least significant index, so each term costs
/// about 1.5 * 3^N multiplications.
pub(crate) fn value_from_vectors(
    tensor: &CorrelationTensor,
    list: &BellTermList,
    vectors: &[[[f64; 3]; 2]],
    scratch: &mut Vec<f64>,
) -> f64 {
    let n = list.n_parties();
    debug_assert_eq!(vectors.len(), n);
    debug_assert_eq!(tensor.n_qubits(), n);
    let values = tensor.values();
    let mut total = 0.0f64;
    let mut width = values.len() / 3;
    scratch.resize(width.max(1), 0.0);
    for term in list.terms() {
        let pick = |j: usize| -> &[f64; 3] {
            match term.pattern[j] {
                Choice::A => &vectors[j][0],
                Choice::B => &vectors[j][1],
            }
        };
        // First contraction reads the tensor itself.
        width = values.len() / 3;
        let v = pick(n - 1);
        for (k, slot) in scratch.iter_mut().enumerate().take(width) {
            let base = 3 * k;
            *slot = values[base] * v[0] + values[base + 1] * v[1] + values[base + 2] * v[2];
        }
        // Remaining contractions shrink the scratch buffer in place.
        for j in (1..n - 1).rev() {
            width /= 3;
            let v = pick(j);
            for k in 0..width {
                let base = 3 * k;
                scratch[k] =
                    scratch[base] * v[0] + scratch[base + 1] * v[1] + scratch[base + 2] * v[2];
            }
        }
        let v = pick(0);
        total += term.coefficient * (scratch[0] * v[0] + scratch[1] * v[1] + scratch[2] * v[2]);
    }
    total
}
