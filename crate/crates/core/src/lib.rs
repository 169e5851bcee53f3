//! Construction and numerical maximization of N-qubit Bell operators.
//!
//! The crate builds symbolic Bell expressions (CHSH, the three- and
//! four-qubit generalizations, and the recursive family obtained by
//! repeatedly adding parties), assembles them into dense operators for
//! arbitrary measurement directions, and searches for the measurement
//! settings that maximize the expectation value on a given density
//! matrix. The search combines simulated annealing with a downhill
//! simplex refinement; closed-form oracles for the two-qubit case allow
//! the stochastic results to be checked independently.
//!
//! Modules:
//! - [`qlinalg`]: dense complex matrices, density matrices, correlation tensors
//! - [`bellops`]: symbolic Bell term lists and their evaluation
//! - [`anneal`]: Metropolis annealing, simplex refinement, multi-restart driver
//! - [`oracles`]: closed-form maxima and hand-checked fixtures
//! - [`bench`]: evaluation-cost measurements and scaling reports
//! - [`limits`]: process-wide qubit-count guard

pub mod anneal;
pub mod bellops;
pub mod bench;
pub mod limits;
pub mod oracles;
pub mod qlinalg;
