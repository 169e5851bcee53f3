//! Independent reference values the stochastic maximizer is checked
//! against.
//!
//! Three kinds of ground truth live here:
//!
//! * the Horodecki closed form for the exact two-party CHSH maximum of an
//!   arbitrary state, computed from the singular spectrum of its 3x3
//!   correlation matrix;
//! * the closed-form quantum maximum 2^((N+1)/2) of the recursion
//!   normalized family on the N-party GHZ state;
//! * hand-checked fixtures: named (state, operator, settings) triples
//!   whose expectation values are known exactly.

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

use crate::bellops::{BellFamily, MeasurementSettings, PartySettings};
use crate::qlinalg::{
    diag_density, ghz, CorrelationTensor, DensityMatrix, SettingAngles,
};

/// CHSH quantum maximum 2 sqrt(2), the ceiling for any two-qubit state.
pub const CHSH_QUANTUM_MAX: f64 = 2.8284271247461903;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("closed-form CHSH maximum requires exactly 2 qubits, got {0}")]
    NotTwoQubits(usize),
}

/// Exact CHSH maximum of a two-qubit state: with T the 3x3 correlation
/// matrix T_ij = Tr(rho sigma_i x sigma_j), the maximum over all
/// measurement directions is 2 sqrt(m1 + m2), where m1 >= m2 are the two
/// largest eigenvalues of T^t T.
pub fn horodecki_chsh(rho: &DensityMatrix) -> Result<f64, OracleError> {
    if rho.n_qubits() != 2 {
        return Err(OracleError::NotTwoQubits(rho.n_qubits()));
    }
    let t = CorrelationTensor::from_density(rho).expect("two qubits are always in range");
    let m = DMatrix::<f64>::from_fn(3, 3, |i, j| t.get(&[i, j]));
    let gram = m.transpose() * &m;
    let eigen = SymmetricEigen::new(gram);
    let mut ev: Vec<f64> = eigen.eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    let top_two = ev[2] + ev[1];
    Ok(2.0 * top_two.max(0.0).sqrt())
}

/// Quantum maximum of the recursion-normalized family on the N-party GHZ
/// state: 2^((N+1)/2). The classical bound stays at 2, so the violation
/// ratio grows as 2^((N-1)/2).
pub fn ghz_normalized_max(n_parties: usize) -> f64 {
    assert!(n_parties >= 2, "the family starts at 2 parties");
    2f64.powf((n_parties as f64 + 1.0) / 2.0)
}

/// The diagonal two-qubit mixture with weight 1/3 on each of |00>, |01>
/// and |11>. Its exact CHSH maximum is 2/3, attained with all four
/// measurement directions along z, so it violates no classical bound.
pub fn thirds_diagonal() -> DensityMatrix {
    diag_density(&[1.0 / 3.0, 1.0 / 3.0, 0.0, 1.0 / 3.0], 2)
        .expect("static probability vector is valid")
}

/// A named (operator, state, settings) triple with a hand-derived
/// expectation value, exact up to floating-point rounding.
pub struct Fixture {
    pub name: &'static str,
    pub family: BellFamily,
    pub state: DensityMatrix,
    pub settings: MeasurementSettings,
    pub expected_value: f64,
}

/// The built-in fixtures:
///
/// * `chsh-optimal`: CHSH on the two-party GHZ state at its optimal
///   directions, value 2 sqrt(2);
/// * `mermin-xy`: the three-party operator on GHZ with every A along
///   x and every B along y, value 4 (its algebraic maximum);
/// * `chsh-thirds-z`: CHSH on the diagonal thirds mixture with all
///   directions along z, value 2/3 (that state's exact maximum).
pub fn fixtures() -> Vec<Fixture> {
    use std::f64::consts::PI;
    let z = SettingAngles::new(0.0, 0.0);
    let x = SettingAngles::new(PI / 2.0, 0.0);
    let y = SettingAngles::new(PI / 2.0, PI / 2.0);
    vec![
        Fixture {
            name: "chsh-optimal",
            family: BellFamily::Chsh,
            state: ghz(2).expect("two qubits are always in range"),
            settings: MeasurementSettings::new(vec![
                PartySettings {
                    a: z,
                    b: x,
                },
                PartySettings {
                    a: SettingAngles::new(PI / 4.0, 0.0),
                    b: SettingAngles::new(PI / 4.0, PI),
                },
            ]),
            expected_value: CHSH_QUANTUM_MAX,
        },
        Fixture {
            name: "mermin-xy",
            family: BellFamily::Mermin,
            state: ghz(3).expect("three qubits are always in range"),
            settings: MeasurementSettings::new(vec![PartySettings { a: x, b: y }; 3]),
            expected_value: 4.0,
        },
        Fixture {
            name: "chsh-thirds-z",
            family: BellFamily::Chsh,
            state: thirds_diagonal(),
            settings: MeasurementSettings::new(vec![PartySettings { a: z, b: z }; 2]),
            expected_value: 2.0 / 3.0,
        },
    ]
}

/// Looks a fixture up by name.
pub fn fixture(name: &str) -> Option<Fixture> {
    fixtures().into_iter().find(|f| f.name == name)
}
