//! Benchmarking toolkit for penalty-encoded QUBO instances of the graphene
//! vacancy problem (a fixed-size densest-k-subgraph).
//!
//! The crate covers the whole pipeline:
//!
//! * [`lattice`]: periodic honeycomb supercells and generic edge-list graphs.
//! * [`qubo`]: the penalty QUBO, energies, Ising conversion and sample sets.
//! * [`classical`]: brute force, uniform random sampling and Metropolis
//!   simulated annealing.
//! * [`vqe`]: noiseless statevector CVaR-VQE with RealAmplitudes and QAOA
//!   ansätze and a derivative-free trust-region optimizer.
//! * [`anneal`]: closed-system transverse-field annealing by split-step
//!   evolution.
//! * [`embedding`]: Chimera topologies, clique and heuristic minor
//!   embeddings, chain decoding.
//! * [`metrics`]: success probability, approximation ratio, error bars,
//!   time-to-solution.
//! * [`harness`]: repeated experiments, grid search, scaling runs, JSONL
//!   records and report emission.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anneal;
pub mod classical;
pub mod embedding;
pub mod error;
pub mod harness;
pub mod lattice;
pub mod metrics;
pub mod optimize;
pub mod qubo;
pub mod seed;
pub mod statevector;
pub mod vqe;

pub use error::{Error, Result};
pub use lattice::LatticeGraph;
pub use qubo::{Bitstring, IsingInstance, QuboInstance, SampleRecord, SampleSet, Timing};

/// Absolute tolerance used for every energy equality comparison.
pub const ENERGY_TOL: f64 = 1e-9;
