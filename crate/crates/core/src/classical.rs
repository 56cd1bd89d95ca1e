//! Classical baselines: exhaustive search, uniform random sampling and
//! single-spin-flip Metropolis simulated annealing.

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubo::{Bitstring, QuboInstance, SampleSet, Timing};
use crate::seed::{rng_from, stream_rng, Rng};
use crate::ENERGY_TOL;

/// Largest instance [`brute_force`] accepts.
pub const BRUTE_FORCE_MAX_VARS: usize = 30;

/// Uphill moves with `beta * delta` above this are rejected without a draw:
/// their acceptance probability is below the resolution of a uniform `f64`.
const MAX_BETA_DELTA: f64 = 40.0;

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceResult {
    pub bits: Bitstring,
    pub energy: f64,
    pub timing: Timing,
}

impl BruteForceResult {
    /// The optimum as a one-shot sample set.
    pub fn to_samples(&self, instance: &QuboInstance) -> SampleSet {
        SampleSet::from_bitstrings(instance, [self.bits.clone()], self.timing)
    }
}

/// Global minimum over all `2^n` configurations by a Gray-code walk. Ties go
/// to the lexicographically smallest bitstring.
pub fn brute_force(instance: &QuboInstance) -> Result<BruteForceResult> {
    let n = instance.n_vars();
    if n > BRUTE_FORCE_MAX_VARS {
        return Err(Error::Guard(format!("brute force over 2^{n} states (limit 2^{BRUTE_FORCE_MAX_VARS})")));
    }
    let start = Instant::now();
    let structure = CouplingStructure::new(instance);
    let mut state = FlipState::new(&structure, vec![0; n], instance.constant_offset());
    let mut best_bits = state.x.clone();
    let mut best_e = state.energy;
    for step in 1u64..(1u64 << n) {
        let i = step.trailing_zeros() as usize;
        let delta = state.delta(&structure, i);
        state.flip(&structure, i, delta);
        if state.energy < best_e - ENERGY_TOL || ((state.energy - best_e).abs() <= ENERGY_TOL && state.x < best_bits) {
            best_e = state.energy;
            best_bits.clone_from(&state.x);
        }
    }
    let energy = instance.energy_unchecked(&best_bits);
    Ok(BruteForceResult {
        bits: Bitstring::new(best_bits),
        energy,
        timing: Timing::device(start.elapsed().as_secs_f64()),
    })
}

/// `n_samples` independent uniformly random bitstrings.
pub fn random_sampling(instance: &QuboInstance, n_samples: u64, seed: u64) -> SampleSet {
    let start = Instant::now();
    let n = instance.n_vars();
    let mut rng = rng_from(seed);
    let mut counts: HashMap<Vec<u8>, u64> = HashMap::new();
    let mut buf = vec![0u8; n];
    for _ in 0..n_samples {
        let mut word = 0u64;
        for (i, b) in buf.iter_mut().enumerate() {
            if i % 64 == 0 {
                word = rng.random();
            }
            *b = ((word >> (i % 64)) & 1) as u8;
        }
        match counts.get_mut(&buf) {
            Some(c) => *c += 1,
            None => {
                counts.insert(buf.clone(), 1);
            }
        }
    }
    let counts: BTreeMap<Bitstring, u64> = counts.into_iter().map(|(b, c)| (Bitstring::new(b), c)).collect();
    let mut samples = SampleSet::from_counts(instance, counts, Timing::default());
    samples.timing = Timing::device(start.elapsed().as_secs_f64());
    samples
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    #[default]
    Geometric,
}

/// Inverse-temperature schedule: one beta per sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaSchedule {
    pub beta_min: f64,
    pub beta_max: f64,
    pub n_sweeps: usize,
    pub kind: ScheduleKind,
}

impl SaSchedule {
    pub fn geometric(beta_min: f64, beta_max: f64, n_sweeps: usize) -> Result<Self> {
        let s = Self { beta_min, beta_max, n_sweeps, kind: ScheduleKind::Geometric };
        s.validate()?;
        Ok(s)
    }

    /// `beta_min <= beta_max` is accepted; equal values give a constant
    /// temperature.
    pub fn validate(&self) -> Result<()> {
        if !(self.beta_min > 0.0 && self.beta_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "beta range must be positive, got [{}, {}]",
                self.beta_min, self.beta_max
            )));
        }
        if self.beta_min > self.beta_max {
            return Err(Error::InvalidArgument(format!(
                "beta_min {} exceeds beta_max {}",
                self.beta_min, self.beta_max
            )));
        }
        if self.n_sweeps == 0 {
            return Err(Error::InvalidArgument("n_sweeps must be at least 1".into()));
        }
        Ok(())
    }

    /// `beta_t = beta_min * (beta_max / beta_min)^(t / (n_sweeps - 1))`.
    pub fn betas(&self) -> Vec<f64> {
        let n = self.n_sweeps;
        if n == 1 {
            return vec![self.beta_min];
        }
        let ratio = self.beta_max / self.beta_min;
        (0..n).map(|t| self.beta_min * ratio.powf(t as f64 / (n - 1) as f64)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepOrder {
    /// Ascending variable index.
    Sequential,
    /// A fresh seeded random permutation every sweep.
    #[default]
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    /// The configuration at the end of the read.
    #[default]
    FinalState,
    /// The lowest-energy configuration visited during the read.
    BestSeen,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaOptions {
    pub order: SweepOrder,
    pub readout: Readout,
    /// Accepted flips between full energy re-evaluations.
    pub audit_interval: u64,
}

impl Default for SaOptions {
    fn default() -> Self {
        Self { order: SweepOrder::Random, readout: Readout::FinalState, audit_interval: 10_000 }
    }
}

/// Output of [`simulated_annealing_traced`].
#[derive(Debug, Clone)]
pub struct SaRun {
    pub samples: SampleSet,
    /// `(elapsed seconds, best energy so far)` after each read.
    pub trajectory: Vec<(f64, f64)>,
}

/// Runs `n_reads` independent anneals; reads execute in parallel and each
/// owns an RNG derived from `(seed, read index)`.
pub fn simulated_annealing(
    instance: &QuboInstance,
    schedule: &SaSchedule,
    n_reads: usize,
    seed: u64,
) -> Result<SampleSet> {
    simulated_annealing_with(instance, schedule, n_reads, seed, &SaOptions::default())
}

pub fn simulated_annealing_with(
    instance: &QuboInstance,
    schedule: &SaSchedule,
    n_reads: usize,
    seed: u64,
    options: &SaOptions,
) -> Result<SampleSet> {
    schedule.validate()?;
    let start = Instant::now();
    let annealer = Annealer::new(instance, schedule, *options);
    let finals: Vec<Vec<u8>> = (0..n_reads)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r as u64);
            annealer.read(&mut rng, |_, _, _| {}).0
        })
        .collect();
    let mut samples = SampleSet::from_bitstrings(instance, finals.into_iter().map(Bitstring::new), Timing::default());
    samples.timing = Timing::device(start.elapsed().as_secs_f64());
    Ok(samples)
}

/// Serial variant that also records the best-so-far energy after every read.
/// Produces the same samples as [`simulated_annealing_with`].
pub fn simulated_annealing_traced(
    instance: &QuboInstance,
    schedule: &SaSchedule,
    n_reads: usize,
    seed: u64,
    options: &SaOptions,
) -> Result<SaRun> {
    schedule.validate()?;
    let start = Instant::now();
    let annealer = Annealer::new(instance, schedule, *options);
    let mut finals = Vec::with_capacity(n_reads);
    let mut trajectory = Vec::with_capacity(n_reads);
    let mut best = f64::INFINITY;
    for r in 0..n_reads {
        let mut rng = stream_rng(seed, r as u64);
        let (bits, read_best) = annealer.read(&mut rng, |_, _, _| {});
        best = best.min(read_best);
        trajectory.push((start.elapsed().as_secs_f64(), best));
        finals.push(Bitstring::new(bits));
    }
    let mut samples = SampleSet::from_bitstrings(instance, finals, Timing::default());
    samples.timing = Timing::device(start.elapsed().as_secs_f64());
    Ok(SaRun { samples, trajectory })
}

/// Off-diagonal couplings split into a uniform background value plus sparse
/// per-pair deviations. Penalty QUBOs are dense but almost uniform, so local
/// fields update in `O(degree)` rather than `O(n)` per accepted flip.
#[derive(Debug, Clone)]
pub(crate) struct CouplingStructure {
    diag: Vec<f64>,
    background: f64,
    deviations: Vec<Vec<(usize, f64)>>,
}

impl CouplingStructure {
    pub(crate) fn new(instance: &QuboInstance) -> Self {
        let n = instance.n_vars();
        let mut freq: HashMap<u64, usize> = HashMap::new();
        for i in 0..n {
            for j in i + 1..n {
                *freq.entry(instance.get(i, j).to_bits()).or_insert(0) += 1;
            }
        }
        // Most frequent value; ties prefer the smaller bit pattern so the
        // choice is deterministic.
        let background = freq
            .into_iter()
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(bits, _)| f64::from_bits(bits))
            .unwrap_or(0.0);
        let mut deviations = vec![Vec::new(); n];
        for i in 0..n {
            for j in i + 1..n {
                let d = instance.get(i, j) - background;
                if d != 0.0 {
                    deviations[i].push((j, d));
                    deviations[j].push((i, d));
                }
            }
        }
        Self { diag: (0..n).map(|i| instance.get(i, i)).collect(), background, deviations }
    }

    fn n(&self) -> usize {
        self.diag.len()
    }
}

/// Configuration plus the cached quantities needed for `O(1)` flip energies.
struct FlipState {
    x: Vec<u8>,
    ones: usize,
    /// Sum of deviation couplings to currently-set neighbours.
    sparse_field: Vec<f64>,
    energy: f64,
}

impl FlipState {
    fn new(s: &CouplingStructure, x: Vec<u8>, constant: f64) -> Self {
        let ones = x.iter().filter(|&&b| b == 1).count();
        let sparse_field: Vec<f64> =
            s.deviations.iter().map(|devs| devs.iter().filter(|(j, _)| x[*j] == 1).map(|(_, d)| d).sum()).collect();
        let mut st = Self { x, ones, sparse_field, energy: 0.0 };
        st.energy = st.full_energy(s, constant);
        st
    }

    fn full_energy(&self, s: &CouplingStructure, constant: f64) -> f64 {
        let m = self.ones as f64;
        let mut e = constant + s.background * m * (m - 1.0) / 2.0;
        for i in (0..s.n()).filter(|&i| self.x[i] == 1) {
            e += s.diag[i];
            e += s.deviations[i].iter().filter(|(j, _)| *j > i && self.x[*j] == 1).map(|(_, d)| d).sum::<f64>();
        }
        e
    }

    #[inline]
    fn delta(&self, s: &CouplingStructure, i: usize) -> f64 {
        let xi = self.x[i];
        let others = (self.ones - xi as usize) as f64;
        let field = s.diag[i] + s.background * others + self.sparse_field[i];
        (1.0 - 2.0 * xi as f64) * field
    }

    #[inline]
    fn flip(&mut self, s: &CouplingStructure, i: usize, delta: f64) {
        let xi = self.x[i];
        let sign = 1.0 - 2.0 * xi as f64;
        self.x[i] = xi ^ 1;
        self.ones = self.ones + 1 - 2 * xi as usize;
        for &(j, d) in &s.deviations[i] {
            self.sparse_field[j] += sign * d;
        }
        self.energy += delta;
    }
}

/// Prepared single-read annealer; shared read-only across worker threads.
pub struct Annealer {
    structure: CouplingStructure,
    constant: f64,
    betas: Vec<f64>,
    options: SaOptions,
}

impl Annealer {
    pub fn new(instance: &QuboInstance, schedule: &SaSchedule, options: SaOptions) -> Self {
        Self {
            structure: CouplingStructure::new(instance),
            constant: instance.constant_offset(),
            betas: schedule.betas(),
            options,
        }
    }

    /// One read from a uniformly random start. `on_sweep(sweep, current
    /// energy, best energy)` is called after each sweep. Returns the recorded
    /// configuration and the best energy seen.
    pub fn read(&self, rng: &mut Rng, mut on_sweep: impl FnMut(usize, f64, f64)) -> (Vec<u8>, f64) {
        let s = &self.structure;
        let n = s.n();
        let x0: Vec<u8> = (0..n).map(|_| rng.random::<bool>() as u8).collect();
        let mut st = FlipState::new(s, x0, self.constant);
        let mut best_e = st.energy;
        let mut best_x = matches!(self.options.readout, Readout::BestSeen).then(|| st.x.clone());
        let mut order: Vec<usize> = (0..n).collect();
        let mut since_audit = 0u64;
        for (sweep, &beta) in self.betas.iter().enumerate() {
            if self.options.order == SweepOrder::Random {
                order.shuffle(rng);
            }
            for &i in &order {
                let delta = st.delta(s, i);
                if delta <= 0.0 || (beta * delta < MAX_BETA_DELTA && rng.random::<f64>() < (-beta * delta).exp()) {
                    st.flip(s, i, delta);
                    since_audit += 1;
                    if since_audit >= self.options.audit_interval {
                        since_audit = 0;
                        let exact = st.full_energy(s, self.constant);
                        assert!(
                            (exact - st.energy).abs() < 1e-6,
                            "incremental energy drifted: {} vs {exact}",
                            st.energy
                        );
                        st.energy = exact;
                    }
                    match best_x.as_mut() {
                        Some(bx) if st.energy < best_e => {
                            best_e = st.energy;
                            bx.clone_from(&st.x);
                        }
                        Some(_) => {}
                        None => best_e = best_e.min(st.energy),
                    }
                }
            }
            on_sweep(sweep, st.energy, best_e);
        }
        (best_x.unwrap_or(st.x), best_e)
    }
}
