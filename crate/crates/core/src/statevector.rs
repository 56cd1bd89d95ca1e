//! Dense statevector over `n` qubits.
//!
//! Basis index bit `i` is the value of qubit `i` (and of variable `x_i`), so
//! amplitude `k` belongs to `Bitstring::from_index(k, n)`.

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

use crate::error::{Error, Result};
use crate::qubo::{Bitstring, SampleRecord, SampleSet, Timing};
use crate::seed::rng_from;

/// Largest register the simulator will allocate.
pub const MAX_QUBITS: usize = 22;

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n: usize,
    amps: Vec<Complex64>,
}

pub(crate) fn check_qubits(n: usize, max: usize) -> Result<()> {
    if n == 0 || n > max {
        return Err(Error::Guard(format!("{n} qubits outside the supported range 1..={max}")));
    }
    Ok(())
}

impl Statevector {
    /// `|0...0>`.
    pub fn zero(n: usize) -> Result<Self> {
        check_qubits(n, MAX_QUBITS)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n, amps })
    }

    /// `|+...+>`.
    pub fn uniform(n: usize) -> Result<Self> {
        check_qubits(n, MAX_QUBITS)?;
        let a = (1.0 / (1u64 << n) as f64).sqrt();
        Ok(Self { n, amps: vec![Complex64::new(a, 0.0); 1 << n] })
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let n = amps.len().trailing_zeros() as usize;
        if !amps.len().is_power_of_two() {
            return Err(Error::InvalidArgument(format!("{} amplitudes is not a power of two", amps.len())));
        }
        check_qubits(n, MAX_QUBITS)?;
        Ok(Self { n, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    /// Applies the 2x2 matrix `[[a, b], [c, d]]` to qubit `q`.
    fn apply_1q(&mut self, q: usize, m: [[Complex64; 2]; 2]) {
        let stride = 1usize << q;
        for block in self.amps.chunks_exact_mut(stride << 1) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                let (u, v) = (*a0, *a1);
                *a0 = m[0][0] * u + m[0][1] * v;
                *a1 = m[1][0] * u + m[1][1] * v;
            }
        }
    }

    /// `Ry(theta) = exp(-i theta Y / 2)`.
    pub fn ry(&mut self, q: usize, theta: f64) {
        let (s, c) = (theta / 2.0).sin_cos();
        let stride = 1usize << q;
        for block in self.amps.chunks_exact_mut(stride << 1) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                let (u, v) = (*a0, *a1);
                *a0 = u * c - v * s;
                *a1 = u * s + v * c;
            }
        }
    }

    /// `Rx(theta) = exp(-i theta X / 2)`.
    pub fn rx(&mut self, q: usize, theta: f64) {
        let (s, c) = (theta / 2.0).sin_cos();
        let cc = Complex64::new(c, 0.0);
        let ms = Complex64::new(0.0, -s);
        self.apply_1q(q, [[cc, ms], [ms, cc]]);
    }

    /// Applies `Rx(theta)` to every qubit.
    pub fn rx_all(&mut self, theta: f64) {
        for q in 0..self.n {
            self.rx(q, theta);
        }
    }

    pub fn cx(&mut self, control: usize, target: usize) {
        assert_ne!(control, target);
        let (cm, tm) = (1usize << control, 1usize << target);
        for k in 0..self.amps.len() {
            if k & cm != 0 && k & tm == 0 {
                self.amps.swap(k, k | tm);
            }
        }
    }

    /// Multiplies amplitude `k` by `exp(-i gamma diag[k])`.
    pub fn phase(&mut self, diag: &[f64], gamma: f64) {
        debug_assert_eq!(diag.len(), self.amps.len());
        for (a, &e) in self.amps.iter_mut().zip(diag) {
            let (s, c) = (-gamma * e).sin_cos();
            *a *= Complex64::new(c, s);
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Largest `|Im a_k|`.
    pub fn max_imag(&self) -> f64 {
        self.amps.iter().map(|a| a.im.abs()).fold(0.0, f64::max)
    }

    /// Exact expectation of a diagonal observable.
    pub fn expectation(&self, diag: &[f64]) -> f64 {
        self.amps.iter().zip(diag).map(|(a, e)| a.norm_sqr() * e).sum()
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &Statevector) -> f64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum::<Complex64>().norm_sqr()
    }

    /// Draws `shots` basis states; `energies[k]` labels basis state `k`.
    pub fn sample(&self, energies: &[f64], shots: u64, seed: u64) -> SampleSet {
        let counts = self.sample_counts(shots, seed);
        counts_to_samples(self.n, &counts, energies)
    }

    /// Shot counts per basis index.
    pub(crate) fn sample_counts(&self, shots: u64, seed: u64) -> Vec<(usize, u64)> {
        let mut rng = rng_from(seed);
        let probs = self.probabilities();
        let dist = WeightedIndex::new(&probs).expect("normalised state has positive mass");
        let mut hits = std::collections::BTreeMap::new();
        for _ in 0..shots {
            *hits.entry(dist.sample(&mut rng)).or_insert(0u64) += 1;
        }
        hits.into_iter().collect()
    }
}

pub(crate) fn counts_to_samples(n: usize, counts: &[(usize, u64)], energies: &[f64]) -> SampleSet {
    let records = counts
        .iter()
        .map(|&(k, count)| SampleRecord { bits: Bitstring::from_index(k as u64, n), energy: energies[k], count })
        .collect();
    SampleSet::from_records(n, records, Timing::default()).expect("consistent lengths")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_qubit_gates() {
        let mut s = Statevector::zero(1).unwrap();
        s.ry(0, PI);
        assert!((s.amplitudes()[1] - c(1.0, 0.0)).norm() < 1e-15);
        let mut s = Statevector::zero(1).unwrap();
        s.rx(0, PI);
        assert!((s.amplitudes()[1] - c(0.0, -1.0)).norm() < 1e-15);
        let mut s = Statevector::zero(1).unwrap();
        s.ry(0, PI / 2.0);
        let h = 0.5f64.sqrt();
        assert!((s.amplitudes()[0] - c(h, 0.0)).norm() < 1e-15);
        assert!((s.amplitudes()[1] - c(h, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn gates_address_the_right_qubit() {
        let mut s = Statevector::zero(3).unwrap();
        s.ry(1, PI);
        assert!((s.amplitudes()[2].re - 1.0).abs() < 1e-15);
        s.cx(1, 2);
        assert!((s.amplitudes()[6].re - 1.0).abs() < 1e-15);
        s.cx(0, 2);
        assert!((s.amplitudes()[6].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn phase_and_expectation() {
        let mut s = Statevector::uniform(2).unwrap();
        let diag = [1.0, 2.0, 3.0, 4.0];
        assert!((s.expectation(&diag) - 2.5).abs() < 1e-15);
        s.phase(&diag, 0.3);
        assert!((s.amplitudes()[3] - c(0.5 * (-1.2f64).cos(), 0.5 * (-1.2f64).sin())).norm() < 1e-15);
        assert!((s.norm_sqr() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn guards() {
        assert!(matches!(Statevector::zero(23), Err(Error::Guard(_))));
        assert!(Statevector::zero(0).is_err());
        assert!(Statevector::from_amplitudes(vec![c(1.0, 0.0); 3]).is_err());
    }

    #[test]
    fn sampling_zero_state() {
        let s = Statevector::zero(3).unwrap();
        let set = s.sample(&[0.0; 8], 500, 1);
        assert_eq!(set.records().len(), 1);
        assert_eq!(set.records()[0].bits.to_string(), "000");
        assert_eq!(set.records()[0].count, 500);
    }

    #[test]
    fn sampling_uniform_state_is_uniform() {
        let s = Statevector::uniform(3).unwrap();
        let shots = 80_000u64;
        let counts = s.sample_counts(shots, 9);
        assert_eq!(counts.len(), 8);
        let p = 1.0 / 8.0;
        let sd = (shots as f64 * p * (1.0 - p)).sqrt();
        for (_, n) in counts {
            assert!((n as f64 - shots as f64 * p).abs() < 4.0 * sd, "{n}");
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let mut s = Statevector::uniform(4).unwrap();
        s.ry(2, 0.4);
        let e: Vec<f64> = (0..16).map(|k| k as f64).collect();
        assert_eq!(s.sample(&e, 1000, 3), s.sample(&e, 1000, 3));
        assert_ne!(s.sample(&e, 1000, 3), s.sample(&e, 1000, 4));
    }
}
