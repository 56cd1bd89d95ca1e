//! Closed-system transverse-field annealing.
//!
//! `H(s) = (1 - s) H_M + s H_P` with `H_M = -sum_i X_i` and `H_P` the
//! diagonal Ising energy, `s = t / anneal_time`. Each step of width `dt` is
//! the symmetric split `M(dt/2) P(dt) M(dt/2)` with `s` taken at the step
//! midpoint.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubo::{IsingInstance, SampleSet, Timing};
use crate::statevector::{check_qubits, Statevector};

/// Largest spin count the evolution accepts.
pub const MAX_SPINS: usize = 16;

/// Minimum steps per unit of anneal time.
pub const STEPS_PER_UNIT_TIME: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealConfig {
    pub anneal_time: f64,
    pub n_steps: usize,
    pub shots: u64,
    pub seed: u64,
}

impl AnnealConfig {
    /// Uses the smallest step count the stability rule allows.
    pub fn new(anneal_time: f64, shots: u64, seed: u64) -> Self {
        Self { anneal_time, n_steps: min_steps(anneal_time), shots, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.anneal_time > 0.0) || !self.anneal_time.is_finite() {
            return Err(Error::InvalidArgument(format!("anneal_time must be positive, got {}", self.anneal_time)));
        }
        if self.n_steps == 0 || self.shots == 0 {
            return Err(Error::InvalidArgument("n_steps and shots must be positive".into()));
        }
        if (self.n_steps as f64) < STEPS_PER_UNIT_TIME * self.anneal_time - 1e-9 {
            return Err(Error::Guard(format!(
                "{} steps is below the required {} for anneal_time {}",
                self.n_steps,
                min_steps(self.anneal_time),
                self.anneal_time
            )));
        }
        Ok(())
    }
}

pub fn min_steps(anneal_time: f64) -> usize {
    ((STEPS_PER_UNIT_TIME * anneal_time - 1e-9).ceil() as usize).max(1)
}

/// Final state of the anneal, starting from `|+...+>`.
pub fn anneal_evolve(ising: &IsingInstance, config: &AnnealConfig) -> Result<Statevector> {
    check_qubits(ising.n_spins(), MAX_SPINS)?;
    config.validate()?;
    let energies = ising.all_energies()?;
    evolve(ising.n_spins(), &energies, config)
}

fn evolve(n: usize, energies: &[f64], config: &AnnealConfig) -> Result<Statevector> {
    let mut state = Statevector::uniform(n)?;
    let dt = config.anneal_time / config.n_steps as f64;
    for k in 0..config.n_steps {
        let s = (k as f64 + 0.5) / config.n_steps as f64;
        // exp(-i (dt/2) (1-s) (-X)) = Rx(-dt (1-s)).
        let half_mixer = -dt * (1.0 - s);
        state.rx_all(half_mixer);
        state.phase(energies, dt * s);
        state.rx_all(half_mixer);
    }
    Ok(state)
}

/// Evolves then draws `shots` samples; device time covers both.
pub fn anneal_sample(ising: &IsingInstance, config: &AnnealConfig) -> Result<SampleSet> {
    let start = Instant::now();
    check_qubits(ising.n_spins(), MAX_SPINS)?;
    config.validate()?;
    let energies = ising.all_energies()?;
    let state = evolve(ising.n_spins(), &energies, config)?;
    let mut samples = state.sample(&energies, config.shots, config.seed);
    samples.timing = Timing::device(start.elapsed().as_secs_f64());
    Ok(samples)
}

/// Exact probability mass on basis states within `tol` of the lowest energy.
pub fn ground_state_probability(state: &Statevector, energies: &[f64], tol: f64) -> f64 {
    let e0 = energies.iter().copied().fold(f64::INFINITY, f64::min);
    state.probabilities().iter().zip(energies).filter(|(_, &e)| e - e0 <= tol).map(|(p, _)| p).sum()
}

/// Doubles the anneal time from `start` until the exact ground-state
/// probability exceeds `target`, within a budget of `max_steps`
/// integration steps. Returns `(anneal_time, probability)`.
pub fn adiabatic_time(ising: &IsingInstance, target: f64, start: f64, max_steps: usize) -> Result<Option<(f64, f64)>> {
    check_qubits(ising.n_spins(), MAX_SPINS)?;
    let energies = ising.all_energies()?;
    let mut t = start;
    while min_steps(t) <= max_steps {
        let config = AnnealConfig::new(t, 1, 0);
        let state = evolve(ising.n_spins(), &energies, &config)?;
        let p = ground_state_probability(&state, &energies, crate::ENERGY_TOL);
        if p > target {
            return Ok(Some((t, p)));
        }
        t *= 2.0;
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(h: f64) -> IsingInstance {
        IsingInstance::new(vec![h], &[], 0.0).unwrap()
    }

    #[test]
    fn single_spin_adiabatic_limit() {
        // h = +1/2 favours s = -1, i.e. x = 1.
        let config = AnnealConfig::new(50.0, 1000, 3);
        let state = anneal_evolve(&single(0.5), &config).unwrap();
        assert!(state.probabilities()[1] > 0.99);
        let samples = anneal_sample(&single(0.5), &config).unwrap();
        let ones: u64 = samples.records().iter().filter(|r| r.bits.bits()[0] == 1).map(|r| r.count).sum();
        assert!(ones >= 990);
        assert_eq!(samples.timing.encoding_s, 0.0);
    }

    #[test]
    fn instant_anneal_stays_uniform() {
        let ising = IsingInstance::new(vec![0.3, -0.4, 0.1], &[(0, 1, 1.0), (1, 2, -0.5)], 0.0).unwrap();
        let state = anneal_evolve(&ising, &AnnealConfig::new(1e-4, 1, 0)).unwrap();
        for p in state.probabilities() {
            assert!((p - 0.125).abs() < 1e-3);
        }
    }

    #[test]
    fn guards() {
        let big = IsingInstance::new(vec![0.0; 17], &[], 0.0).unwrap();
        assert!(matches!(anneal_evolve(&big, &AnnealConfig::new(1.0, 1, 0)), Err(Error::Guard(_))));
        let bad = AnnealConfig { anneal_time: 10.0, n_steps: 99, shots: 1, seed: 0 };
        assert!(matches!(anneal_evolve(&single(1.0), &bad), Err(Error::Guard(_))));
        assert!(anneal_evolve(&single(1.0), &AnnealConfig { n_steps: 100, ..bad }).is_ok());
        assert!(AnnealConfig::new(0.0, 1, 0).validate().is_err());
    }

    #[test]
    fn norm_and_convergence_order() {
        let ising =
            IsingInstance::new(vec![0.3, -0.4, 0.1, 0.2], &[(0, 1, 1.0), (1, 2, -0.5), (2, 3, 0.7)], 0.0).unwrap();
        let coarse = AnnealConfig { anneal_time: 5.0, n_steps: 1000, shots: 1, seed: 0 };
        let a = anneal_evolve(&ising, &coarse).unwrap();
        let b = anneal_evolve(&ising, &AnnealConfig { n_steps: 2000, ..coarse }).unwrap();
        assert!((a.norm_sqr() - 1.0).abs() < 1e-8);
        assert!(1.0 - a.fidelity(&b) < 1e-6);
    }

    #[test]
    fn expectation_respects_ground_bound() {
        let ising = IsingInstance::new(vec![0.3, -0.4, 0.1], &[(0, 1, 1.0), (1, 2, -0.5)], 2.0).unwrap();
        let energies = ising.all_energies().unwrap();
        let e0 = energies.iter().copied().fold(f64::INFINITY, f64::min);
        for t in [0.5, 2.0, 8.0] {
            let s = anneal_evolve(&ising, &AnnealConfig::new(t, 1, 0)).unwrap();
            assert!(s.expectation(&energies) >= e0 - 1e-12);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let ising = IsingInstance::new(vec![0.3, -0.4], &[(0, 1, 1.0)], 0.0).unwrap();
        let c = AnnealConfig::new(3.0, 500, 8);
        let mut a = anneal_sample(&ising, &c).unwrap();
        let mut b = anneal_sample(&ising, &c).unwrap();
        a.timing = Timing::default();
        b.timing = Timing::default();
        assert_eq!(a, b);
    }
}
