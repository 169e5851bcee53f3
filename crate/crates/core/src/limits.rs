//! Process-wide guard on the number of qubits.
//!
//! Dense operators grow as 4^N, so constructors refuse sizes above a
//! configurable ceiling instead of exhausting memory. The ceiling is a
//! process-wide setting; the command-line front end raises or lowers it
//! from the environment at startup.

use std::sync::atomic::{AtomicUsize, Ordering};

/// Default ceiling on the qubit count accepted by constructors.
pub const DEFAULT_MAX_QUBITS: usize = 10;

static MAX_QUBITS: AtomicUsize = AtomicUsize::new(DEFAULT_MAX_QUBITS);

/// Current ceiling on the qubit count.
pub fn max_qubits() -> usize {
    MAX_QUBITS.load(Ordering::Relaxed)
}

/// Replaces the qubit-count ceiling. Values below 1 are clamped to 1.
pub fn set_max_qubits(n: usize) {
    MAX_QUBITS.store(n.max(1), Ordering::Relaxed);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_ceiling_is_ten() {
        assert_eq!(DEFAULT_MAX_QUBITS, 10);
    }
}
