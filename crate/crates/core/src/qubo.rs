//! Penalty-encoded QUBO instances, their Ising form, and sample sets.
//!
//! For a graph with adjacency `A`, bond energy `kappa`, penalty `lambda` and
//! `n_carbon` required ones, the cost matrix is upper triangular with
//! diagonal `lambda * (1 - 2 n_carbon)` and off-diagonal `2 lambda - kappa A_ij`.
//! Expanding the squared constraint drops `lambda * n_carbon^2`; it is kept
//! as `constant_offset` and added back by [`QuboInstance::energy`], so a
//! feasible configuration's energy is exactly `-kappa` times its number of
//! surviving bonds.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeGraph;
use crate::ENERGY_TOL;

/// Binary configuration `x_0 x_1 ... x_{n-1}`; a `0` marks a vacancy.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Bitstring(Vec<u8>);

impl Bitstring {
    pub fn new(bits: Vec<u8>) -> Self {
        debug_assert!(bits.iter().all(|&b| b <= 1));
        Self(bits)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0; n])
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![1; n])
    }

    /// Bit `i` of `index` becomes `x_i`.
    pub fn from_index(index: u64, n: usize) -> Self {
        Self((0..n).map(|i| ((index >> i) & 1) as u8).collect())
    }

    pub fn to_index(&self) -> u64 {
        self.0.iter().enumerate().fold(0, |acc, (i, &b)| acc | (u64::from(b) << i))
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count_zeros(&self) -> usize {
        self.0.iter().filter(|&&b| b == 0).count()
    }

    /// Ising spins under `s = 1 - 2x`.
    pub fn spins(&self) -> Vec<i8> {
        self.0.iter().map(|&b| 1 - 2 * b as i8).collect()
    }

    pub fn from_spins(spins: &[i8]) -> Self {
        Self(spins.iter().map(|&s| u8::from(s < 0)).collect())
    }
}

impl fmt::Display for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for Bitstring {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::InvalidArgument(format!("invalid bit character `{other}`"))),
            })
            .collect::<Result<Vec<u8>>>()
            .map(Self)
    }
}

impl Serialize for Bitstring {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Bitstring {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Anything that assigns an energy to a bitstring.
pub trait EnergyModel {
    fn n_vars(&self) -> usize;
    fn energy_of(&self, bits: &[u8]) -> f64;
}

/// Problem parameters of a penalty-encoded instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyParams {
    pub kappa: f64,
    pub lambda: f64,
    pub n_carbon: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuboInstance {
    n: usize,
    /// Row-major `n x n`, zero below the diagonal.
    q: Vec<f64>,
    params: Option<PenaltyParams>,
    constant_offset: f64,
}

impl QuboInstance {
    /// Builds the penalty QUBO for `graph` with `n_vacancies` required zeros.
    pub fn penalty(graph: &LatticeGraph, kappa: f64, lambda: f64, n_vacancies: usize) -> Result<Self> {
        let n = graph.n_sites();
        if n_vacancies > n {
            return Err(Error::InvalidArgument(format!("{n_vacancies} vacancies exceed {n} sites")));
        }
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(Error::InvalidArgument(format!("kappa must be positive, got {kappa}")));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda must be non-negative, got {lambda}")));
        }
        let n_carbon = n - n_vacancies;
        let diag = lambda * (1.0 - 2.0 * n_carbon as f64);
        let mut q = vec![0.0; n * n];
        for i in 0..n {
            q[i * n + i] = diag;
            for j in i + 1..n {
                q[i * n + j] = 2.0 * lambda;
            }
        }
        for (i, j) in graph.edges() {
            q[i * n + j] = 2.0 * lambda - kappa;
        }
        Ok(Self {
            n,
            q,
            params: Some(PenaltyParams { kappa, lambda, n_carbon }),
            constant_offset: lambda * (n_carbon as f64).powi(2),
        })
    }

    /// Builds an instance from `(i, j, value)` entries. Entries with `j < i`
    /// are folded onto `(j, i)`; repeated entries accumulate.
    pub fn from_entries(n: usize, entries: &[(usize, usize, f64)], constant_offset: f64) -> Result<Self> {
        let mut q = vec![0.0; n * n];
        for &(i, j, v) in entries {
            if i >= n || j >= n {
                return Err(Error::InvalidArgument(format!("entry ({i}, {j}) out of range for {n} variables")));
            }
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            q[a * n + b] += v;
        }
        Ok(Self { n, q, params: None, constant_offset })
    }

    pub fn n_vars(&self) -> usize {
        self.n
    }

    /// Upper-triangular entry; zero for `j < i`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j < i {
            0.0
        } else {
            self.q[i * self.n + j]
        }
    }

    /// Symmetrised off-diagonal coupling between `i` and `j`.
    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        if i == j {
            0.0
        } else {
            self.get(i.min(j), i.max(j))
        }
    }

    pub fn params(&self) -> Option<PenaltyParams> {
        self.params
    }

    pub fn constant_offset(&self) -> f64 {
        self.constant_offset
    }

    /// Number of required zeros, for penalty instances.
    pub fn n_vacancies(&self) -> Option<usize> {
        self.params.map(|p| self.n - p.n_carbon)
    }

    /// `x^T Q x + constant_offset`.
    pub fn energy(&self, x: &[u8]) -> Result<f64> {
        if x.len() != self.n {
            return Err(Error::LengthMismatch { expected: self.n, got: x.len() });
        }
        Ok(self.energy_unchecked(x))
    }

    pub(crate) fn energy_unchecked(&self, x: &[u8]) -> f64 {
        let n = self.n;
        let mut e = 0.0;
        for i in (0..n).filter(|&i| x[i] == 1) {
            let row = &self.q[i * n..(i + 1) * n];
            e += row[i];
            for j in i + 1..n {
                if x[j] == 1 {
                    e += row[j];
                }
            }
        }
        e + self.constant_offset
    }

    /// Ising form under `x_i = (1 - s_i) / 2`.
    pub fn to_ising(&self) -> IsingInstance {
        let n = self.n;
        let mut h = vec![0.0; n];
        let mut j = vec![0.0; n * n];
        let mut offset = self.constant_offset;
        for a in 0..n {
            let qaa = self.q[a * n + a];
            h[a] -= qaa / 2.0;
            offset += qaa / 2.0;
            for b in a + 1..n {
                let qab = self.q[a * n + b];
                if qab != 0.0 {
                    j[a * n + b] = qab / 4.0;
                    h[a] -= qab / 4.0;
                    h[b] -= qab / 4.0;
                    offset += qab / 4.0;
                }
            }
        }
        IsingInstance { n, h, j, offset }
    }

    /// Energies of all `2^n` configurations indexed by [`Bitstring::to_index`],
    /// computed by a Gray-code walk in `O(n)` per state.
    pub fn all_energies(&self) -> Result<Vec<f64>> {
        const MAX_VARS: usize = 26;
        if self.n > MAX_VARS {
            return Err(Error::Guard(format!("full energy table needs 2^{} entries (limit 2^{MAX_VARS})", self.n)));
        }
        let n = self.n;
        let size = 1usize << n;
        let mut out = vec![0.0; size];
        let mut x = vec![0u8; n];
        // field[i] = Q_ii + sum_j coupling(i, j) x_j
        let mut field: Vec<f64> = (0..n).map(|i| self.q[i * n + i]).collect();
        let mut e = self.constant_offset;
        out[0] = e;
        for step in 1..size {
            let i = step.trailing_zeros() as usize;
            let delta = if x[i] == 0 { field[i] } else { -field[i] };
            e += delta;
            let sign = if x[i] == 0 { 1.0 } else { -1.0 };
            x[i] ^= 1;
            for (k, f) in field.iter_mut().enumerate() {
                if k != i {
                    *f += sign * self.coupling(i, k);
                }
            }
            let gray = step ^ (step >> 1);
            out[gray] = e;
        }
        Ok(out)
    }

    /// Serialises to the JSON instance format (non-zero upper entries only).
    pub fn to_json(&self) -> String {
        let file = QuboFile {
            n_vars: self.n,
            kappa: self.params.map(|p| p.kappa),
            lambda: self.params.map(|p| p.lambda),
            n_carbon: self.params.map(|p| p.n_carbon),
            constant_offset: self.constant_offset,
            entries: (0..self.n)
                .flat_map(|i| (i..self.n).map(move |j| (i, j)))
                .filter_map(|(i, j)| {
                    let v = self.q[i * self.n + j];
                    (v != 0.0).then_some((i, j, v))
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("serialisable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: QuboFile = serde_json::from_str(text)?;
        let mut inst = Self::from_entries(file.n_vars, &file.entries, file.constant_offset)?;
        match (file.kappa, file.lambda, file.n_carbon) {
            (Some(kappa), Some(lambda), Some(n_carbon)) => {
                if n_carbon > file.n_vars {
                    return Err(Error::InvalidArgument(format!("n_carbon {n_carbon} exceeds n_vars {}", file.n_vars)));
                }
                inst.params = Some(PenaltyParams { kappa, lambda, n_carbon });
            }
            (None, None, None) => {}
            _ => return Err(Error::InvalidArgument("kappa, lambda and n_carbon must be given together".into())),
        }
        Ok(inst)
    }
}

impl EnergyModel for QuboInstance {
    fn n_vars(&self) -> usize {
        self.n
    }

    fn energy_of(&self, bits: &[u8]) -> f64 {
        self.energy_unchecked(bits)
    }
}

#[derive(Serialize, Deserialize)]
struct QuboFile {
    n_vars: usize,
    kappa: Option<f64>,
    lambda: Option<f64>,
    n_carbon: Option<usize>,
    constant_offset: f64,
    entries: Vec<(usize, usize, f64)>,
}

/// `E(s) = sum_i h_i s_i + sum_{i<j} J_ij s_i s_j + offset` over `s_i = +-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingInstance {
    n: usize,
    h: Vec<f64>,
    /// Row-major `n x n`, non-zero only for `j > i`.
    j: Vec<f64>,
    offset: f64,
}

impl IsingInstance {
    pub fn new(h: Vec<f64>, couplings: &[(usize, usize, f64)], offset: f64) -> Result<Self> {
        let n = h.len();
        let mut j = vec![0.0; n * n];
        for &(a, b, v) in couplings {
            if a >= n || b >= n || a == b {
                return Err(Error::InvalidArgument(format!("invalid coupling ({a}, {b}) for {n} spins")));
            }
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            j[lo * n + hi] += v;
        }
        Ok(Self { n, h, j, offset })
    }

    pub fn n_spins(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn coupling(&self, a: usize, b: usize) -> f64 {
        if a == b {
            return 0.0;
        }
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        self.j[lo * self.n + hi]
    }

    /// Non-zero couplings `(i, j, J_ij)` with `i < j`.
    pub fn couplings(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |a| {
            (a + 1..self.n).filter_map(move |b| {
                let v = self.j[a * self.n + b];
                (v != 0.0).then_some((a, b, v))
            })
        })
    }

    pub fn energy_offset(&self) -> f64 {
        self.offset
    }

    pub fn energy(&self, spins: &[i8]) -> Result<f64> {
        if spins.len() != self.n {
            return Err(Error::LengthMismatch { expected: self.n, got: spins.len() });
        }
        let n = self.n;
        let mut e = self.offset;
        for a in 0..n {
            let sa = f64::from(spins[a]);
            e += self.h[a] * sa;
            let row = &self.j[a * n..(a + 1) * n];
            for b in a + 1..n {
                if row[b] != 0.0 {
                    e += row[b] * sa * f64::from(spins[b]);
                }
            }
        }
        Ok(e)
    }

    /// Energy of the spin image `s = 1 - 2x` of a bitstring.
    pub fn energy_bits(&self, x: &[u8]) -> Result<f64> {
        let spins: Vec<i8> = x.iter().map(|&b| 1 - 2 * b as i8).collect();
        self.energy(&spins)
    }

    /// QUBO form under `s_i = 1 - 2 x_i`.
    pub fn to_qubo(&self) -> QuboInstance {
        let n = self.n;
        let mut entries = Vec::new();
        let mut offset = self.offset;
        let mut diag: Vec<f64> = self.h.iter().map(|&h| -2.0 * h).collect();
        offset += self.h.iter().sum::<f64>();
        for (a, b, v) in self.couplings() {
            entries.push((a, b, 4.0 * v));
            diag[a] -= 2.0 * v;
            diag[b] -= 2.0 * v;
            offset += v;
        }
        entries.extend(diag.into_iter().enumerate().filter(|(_, d)| *d != 0.0).map(|(i, d)| (i, i, d)));
        QuboInstance::from_entries(n, &entries, offset).expect("indices in range")
    }

    /// Diagonal of the problem Hamiltonian over all `2^n` basis states.
    pub fn all_energies(&self) -> Result<Vec<f64>> {
        self.to_qubo().all_energies()
    }
}

impl EnergyModel for IsingInstance {
    fn n_vars(&self) -> usize {
        self.n
    }

    fn energy_of(&self, bits: &[u8]) -> f64 {
        self.energy_bits(bits).expect("length checked by caller")
    }
}

/// Result of enumerating the feasible (fixed vacancy count) subspace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstrainedExtrema {
    pub e_min: f64,
    pub e_max: f64,
    pub n_ground_states: u64,
    pub n_feasible: u64,
}

/// Largest feasible-space size `constrained_extrema` will enumerate.
pub const MAX_CONSTRAINED_STATES: u128 = 100_000_000;

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Exact min/max energy and ground-state degeneracy over configurations with
/// exactly the instance's vacancy count.
pub fn constrained_extrema(instance: &QuboInstance) -> Result<ConstrainedExtrema> {
    let k =
        instance.n_vacancies().ok_or_else(|| Error::InvalidArgument("instance has no vacancy constraint".into()))?;
    constrained_extrema_with(instance, k)
}

/// As [`constrained_extrema`] with an explicit number of zeros.
pub fn constrained_extrema_with(instance: &QuboInstance, n_zeros: usize) -> Result<ConstrainedExtrema> {
    let n = instance.n_vars();
    if n_zeros > n {
        return Err(Error::InvalidArgument(format!("{n_zeros} zeros exceed {n} variables")));
    }
    let count = binomial(n, n_zeros);
    if count > MAX_CONSTRAINED_STATES {
        return Err(Error::Guard(format!(
            "C({n}, {n_zeros}) = {count} feasible states exceeds {MAX_CONSTRAINED_STATES}"
        )));
    }

    // Enumerate whichever of the zero set / one set is smaller. Each set's
    // energy is a sum of per-vertex terms and pair terms, accumulated along a
    // depth-first combination walk.
    let enumerate_zeros = n_zeros <= n - n_zeros;
    let (size, base, weight): (usize, f64, Vec<f64>) = if enumerate_zeros {
        let total: f64 = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).map(|(i, j)| instance.get(i, j)).sum();
        let d = (0..n).map(|i| -(instance.get(i, i) + (0..n).map(|j| instance.coupling(i, j)).sum::<f64>())).collect();
        (n_zeros, total + instance.constant_offset(), d)
    } else {
        let d = (0..n).map(|i| instance.get(i, i)).collect();
        (n - n_zeros, instance.constant_offset(), d)
    };

    let mut acc = Extrema::default();
    let mut chosen = Vec::with_capacity(size);
    walk(instance, &weight, size, 0, base, &mut chosen, &mut acc);
    Ok(ConstrainedExtrema { e_min: acc.min, e_max: acc.max, n_ground_states: acc.n_min, n_feasible: acc.visited })
}

struct Extrema {
    min: f64,
    max: f64,
    n_min: u64,
    visited: u64,
}

impl Default for Extrema {
    fn default() -> Self {
        Self { min: f64::INFINITY, max: f64::NEG_INFINITY, n_min: 0, visited: 0 }
    }
}

fn walk(
    inst: &QuboInstance,
    weight: &[f64],
    size: usize,
    start: usize,
    partial: f64,
    chosen: &mut Vec<usize>,
    acc: &mut Extrema,
) {
    if chosen.len() == size {
        acc.visited += 1;
        if partial < acc.min - ENERGY_TOL {
            acc.min = partial;
            acc.n_min = 1;
        } else if (partial - acc.min).abs() <= ENERGY_TOL {
            acc.n_min += 1;
        }
        acc.max = acc.max.max(partial);
        return;
    }
    let n = inst.n_vars();
    let remaining = size - chosen.len();
    for v in start..=n - remaining {
        let pairs: f64 = chosen.iter().map(|&u| inst.coupling(u, v)).sum();
        chosen.push(v);
        walk(inst, weight, size, v + 1, partial + weight[v] + pairs, chosen, acc);
        chosen.pop();
    }
}

/// Runtime breakdown of one solver invocation, in seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub encoding_s: f64,
    pub latency_s: f64,
    pub device_s: f64,
}

impl Timing {
    pub fn device(device_s: f64) -> Self {
        Self { device_s, ..Self::default() }
    }

    pub fn user_runtime(&self) -> f64 {
        self.encoding_s + self.latency_s + self.device_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub bits: Bitstring,
    pub energy: f64,
    pub count: u64,
}

/// Multiset of sampled configurations with their energies, in canonical
/// (ascending bitstring) order.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    n_vars: usize,
    records: Vec<SampleRecord>,
    n_shots_total: u64,
    pub timing: Timing,
}

impl SampleSet {
    pub fn empty(n_vars: usize) -> Self {
        Self { n_vars, records: Vec::new(), n_shots_total: 0, timing: Timing::default() }
    }

    /// Builds a sample set from shot counts, computing each distinct
    /// configuration's energy from `model`.
    pub fn from_counts<M: EnergyModel + ?Sized>(model: &M, counts: BTreeMap<Bitstring, u64>, timing: Timing) -> Self {
        let n_vars = model.n_vars();
        let mut n_shots_total = 0;
        let records = counts
            .into_iter()
            .filter(|(_, c)| *c > 0)
            .map(|(bits, count)| {
                debug_assert_eq!(bits.len(), n_vars);
                n_shots_total += count;
                let energy = model.energy_of(bits.bits());
                SampleRecord { bits, energy, count }
            })
            .collect();
        Self { n_vars, records, n_shots_total, timing }
    }

    pub fn from_bitstrings<M: EnergyModel + ?Sized>(
        model: &M,
        shots: impl IntoIterator<Item = Bitstring>,
        timing: Timing,
    ) -> Self {
        let mut counts = BTreeMap::new();
        for b in shots {
            *counts.entry(b).or_insert(0) += 1;
        }
        Self::from_counts(model, counts, timing)
    }

    /// Builds a sample set from pre-computed records, merging duplicates.
    pub fn from_records(n_vars: usize, records: Vec<SampleRecord>, timing: Timing) -> Result<Self> {
        let mut merged: BTreeMap<Bitstring, (f64, u64)> = BTreeMap::new();
        for r in records {
            if r.bits.len() != n_vars {
                return Err(Error::LengthMismatch { expected: n_vars, got: r.bits.len() });
            }
            merged.entry(r.bits).or_insert((r.energy, 0)).1 += r.count;
        }
        let mut n_shots_total = 0;
        let records = merged
            .into_iter()
            .filter(|(_, (_, c))| *c > 0)
            .map(|(bits, (energy, count))| {
                n_shots_total += count;
                SampleRecord { bits, energy, count }
            })
            .collect();
        Ok(Self { n_vars, records, n_shots_total, timing })
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn records(&self) -> &[SampleRecord] {
        &self.records
    }

    pub fn n_shots_total(&self) -> u64 {
        self.n_shots_total
    }

    pub fn is_empty(&self) -> bool {
        self.n_shots_total == 0
    }

    /// Keeps the records satisfying `keep`; timing is preserved.
    pub fn filter(&self, mut keep: impl FnMut(&SampleRecord) -> bool) -> Self {
        let records: Vec<SampleRecord> = self.records.iter().filter(|r| keep(r)).cloned().collect();
        let n_shots_total = records.iter().map(|r| r.count).sum();
        Self { n_vars: self.n_vars, records, n_shots_total, timing: self.timing }
    }

    /// Pools the shots of several sample sets; timings add up.
    pub fn merge<'a>(sets: impl IntoIterator<Item = &'a SampleSet>) -> Result<Self> {
        let mut n_vars = None;
        let mut records = Vec::new();
        let mut timing = Timing::default();
        for s in sets {
            if *n_vars.get_or_insert(s.n_vars) != s.n_vars {
                return Err(Error::LengthMismatch { expected: n_vars.unwrap_or(0), got: s.n_vars });
            }
            records.extend(s.records.iter().cloned());
            timing.encoding_s += s.timing.encoding_s;
            timing.latency_s += s.timing.latency_s;
            timing.device_s += s.timing.device_s;
        }
        Self::from_records(n_vars.unwrap_or(0), records, timing)
    }

    /// All shot energies with multiplicity expanded, ascending.
    pub fn sorted_shot_energies(&self) -> Vec<f64> {
        let mut pairs: Vec<(f64, u64)> = self.records.iter().map(|r| (r.energy, r.count)).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out = Vec::with_capacity(self.n_shots_total as usize);
        for (e, c) in pairs {
            out.extend(std::iter::repeat_n(e, c as usize));
        }
        out
    }

    pub fn mean_energy(&self) -> Option<f64> {
        if self.n_shots_total == 0 {
            return None;
        }
        let sum: f64 = self.records.iter().map(|r| r.energy * r.count as f64).sum();
        Some(sum / self.n_shots_total as f64)
    }

    pub fn min_energy(&self) -> Option<f64> {
        self.records.iter().map(|r| r.energy).min_by(f64::total_cmp)
    }

    /// Largest deviation between stored energies and `model`'s.
    pub fn max_energy_error<M: EnergyModel + ?Sized>(&self, model: &M) -> f64 {
        self.records.iter().map(|r| (r.energy - model.energy_of(r.bits.bits())).abs()).fold(0.0, f64::max)
    }

    /// Energy histogram: `(energy, shot count)` pairs in ascending energy,
    /// merging energies within [`ENERGY_TOL`].
    pub fn energy_histogram(&self) -> Vec<(f64, u64)> {
        let mut pairs: Vec<(f64, u64)> = self.records.iter().map(|r| (r.energy, r.count)).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, u64)> = Vec::new();
        for (e, c) in pairs {
            match out.last_mut() {
                Some(last) if (e - last.0).abs() <= ENERGY_TOL => last.1 += c,
                _ => out.push((e, c)),
            }
        }
        out
    }

    /// JSON-lines serialisation, one record per distinct bitstring.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("serialisable"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(n_vars: usize, text: &str) -> Result<Self> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str::<SampleRecord>)
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Self::from_records(n_vars, records, Timing::default())
    }
}
