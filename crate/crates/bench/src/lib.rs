//! Shared fixtures for the criterion benchmarks.

use qubobench::{LatticeGraph, QuboInstance};

/// Penalty QUBO of a `dim x dim` supercell with three vacancies.
pub fn supercell_instance(dim: usize, lambda: f64) -> QuboInstance {
    QuboInstance::penalty(&LatticeGraph::supercell(dim).expect("dim >= 2"), 1.0, lambda, 3).expect("valid instance")
}
