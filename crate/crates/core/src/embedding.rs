//! Hardware graphs, clique and heuristic minor embeddings, and chain decoding.
//!
//! Chimera `C(m, m, t)` qubit `(row, col, side, k)` has index
//! `((row * m + col) * 2 + side) * t + k`. Within a cell every side-0 qubit
//! couples to every side-1 qubit. Side-0 (vertical) qubits couple to the same
//! `k` in the cell below, side-1 (horizontal) qubits to the cell on the right.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::classical::{simulated_annealing, SaSchedule};
use crate::error::{Error, Result};
use crate::lattice::{parse_edge_list, write_edge_list, LatticeGraph};
use crate::qubo::{Bitstring, EnergyModel, IsingInstance, SampleRecord, SampleSet};
use crate::seed::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TopologyKind {
    Chimera { m: usize, t: usize },
    Custom,
}

/// Physical qubit connectivity graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetTopology {
    n_physical: usize,
    couplers: BTreeSet<(usize, usize)>,
    kind: TopologyKind,
    adj: Vec<Vec<usize>>,
}

impl TargetTopology {
    fn build(n_physical: usize, couplers: BTreeSet<(usize, usize)>, kind: TopologyKind) -> Self {
        let mut adj = vec![Vec::new(); n_physical];
        for &(a, b) in &couplers {
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        Self { n_physical, couplers, kind, adj }
    }

    pub fn chimera(m: usize, t: usize) -> Result<Self> {
        if m == 0 || t == 0 {
            return Err(Error::InvalidArgument(format!("chimera dimensions must be positive, got m={m} t={t}")));
        }
        let q = |row: usize, col: usize, side: usize, k: usize| ((row * m + col) * 2 + side) * t + k;
        let mut couplers = BTreeSet::new();
        for row in 0..m {
            for col in 0..m {
                for a in 0..t {
                    for b in 0..t {
                        couplers.insert((q(row, col, 0, a), q(row, col, 1, b)));
                    }
                    if row + 1 < m {
                        couplers.insert((q(row, col, 0, a), q(row + 1, col, 0, a)));
                    }
                    if col + 1 < m {
                        couplers.insert((q(row, col, 1, a), q(row, col + 1, 1, a)));
                    }
                }
            }
        }
        Ok(Self::build(2 * t * m * m, couplers, TopologyKind::Chimera { m, t }))
    }

    /// Arbitrary coupler set; self-couplers and out-of-range indices are
    /// rejected.
    pub fn custom(n_physical: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let g = LatticeGraph::from_edges(n_physical, pairs)?;
        Ok(Self::build(n_physical, g.edges().collect(), TopologyKind::Custom))
    }

    /// Parses the `PHYS <count>` edge-list format.
    pub fn parse(text: &str) -> Result<Self> {
        let (n, couplers) = parse_edge_list(text, "PHYS")?;
        Ok(Self::build(n, couplers, TopologyKind::Custom))
    }

    pub fn to_edge_list(&self) -> String {
        write_edge_list("PHYS", self.n_physical, &self.couplers)
    }

    pub fn n_physical(&self) -> usize {
        self.n_physical
    }

    pub fn n_couplers(&self) -> usize {
        self.couplers.len()
    }

    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    pub fn couplers(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.couplers.iter().copied()
    }

    pub fn has_coupler(&self, a: usize, b: usize) -> bool {
        self.couplers.contains(&(a.min(b), a.max(b)))
    }

    pub fn neighbors(&self, q: usize) -> &[usize] {
        &self.adj[q]
    }
}

/// Chains of physical qubits per logical variable, bound with strength
/// `chain_strength`.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    chains: Vec<Vec<usize>>,
    pub chain_strength: f64,
}

#[derive(Serialize, Deserialize)]
struct EmbeddingJson {
    chains: BTreeMap<usize, Vec<usize>>,
    chain_strength: f64,
}

impl Embedding {
    /// Chains are sorted and deduplicated; validity is checked separately.
    pub fn new(chains: Vec<Vec<usize>>, chain_strength: f64) -> Self {
        let chains = chains
            .into_iter()
            .map(|mut c| {
                c.sort_unstable();
                c.dedup();
                c
            })
            .collect();
        Self { chains, chain_strength }
    }

    pub fn with_chain_strength(mut self, chain_strength: f64) -> Self {
        self.chain_strength = chain_strength;
        self
    }

    pub fn chains(&self) -> &[Vec<usize>] {
        &self.chains
    }

    pub fn n_logical(&self) -> usize {
        self.chains.len()
    }

    pub fn chain_lengths(&self) -> Vec<usize> {
        self.chains.iter().map(Vec::len).collect()
    }

    pub fn n_physical_used(&self) -> usize {
        self.chains.iter().map(Vec::len).sum()
    }

    pub fn to_json(&self) -> String {
        let doc = EmbeddingJson {
            chains: self.chains.iter().cloned().enumerate().collect(),
            chain_strength: self.chain_strength,
        };
        serde_json::to_string(&doc).expect("serialisable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: EmbeddingJson = serde_json::from_str(text)?;
        let n = doc.chains.len();
        if doc.chains.keys().copied().ne(0..n) {
            return Err(Error::InvalidEmbedding("chain keys must be 0..n without gaps".into()));
        }
        Ok(Self::new(doc.chains.into_values().collect(), doc.chain_strength))
    }
}

/// Logical interaction graph of an Ising instance (non-zero couplings).
pub fn interaction_graph(ising: &IsingInstance) -> LatticeGraph {
    LatticeGraph::from_edges(ising.n_spins(), ising.couplings().map(|(a, b, _)| (a, b)))
        .expect("couplings are a simple graph")
}

/// Checks chain non-emptiness, disjointness, connectivity and coverage of
/// every logical edge.
pub fn validate_embedding(emb: &Embedding, logical: &LatticeGraph, topo: &TargetTopology) -> Result<()> {
    let bad = |msg: String| Err(Error::InvalidEmbedding(msg));
    if emb.n_logical() != logical.n_sites() {
        return bad(format!("{} chains for {} logical variables", emb.n_logical(), logical.n_sites()));
    }
    let mut owner = vec![usize::MAX; topo.n_physical()];
    for (v, chain) in emb.chains.iter().enumerate() {
        if chain.is_empty() {
            return bad(format!("chain {v} is empty"));
        }
        for &q in chain {
            if q >= topo.n_physical() {
                return bad(format!("chain {v} uses qubit {q} outside the topology"));
            }
            if owner[q] != usize::MAX {
                return bad(format!("qubit {q} shared by chains {} and {v}", owner[q]));
            }
            owner[q] = v;
        }
    }
    for (v, chain) in emb.chains.iter().enumerate() {
        let mut seen = BTreeSet::from([chain[0]]);
        let mut queue = VecDeque::from([chain[0]]);
        while let Some(q) = queue.pop_front() {
            for &w in topo.neighbors(q) {
                if owner[w] == v && seen.insert(w) {
                    queue.push_back(w);
                }
            }
        }
        if seen.len() != chain.len() {
            return bad(format!("chain {v} is not connected"));
        }
    }
    for (i, j) in logical.edges() {
        if chain_coupler(emb, topo, i, j).is_none() {
            return bad(format!("no coupler between chains {i} and {j}"));
        }
    }
    Ok(())
}

/// Lowest-index physical coupler joining chains `i` and `j`.
fn chain_coupler(emb: &Embedding, topo: &TargetTopology, i: usize, j: usize) -> Option<(usize, usize)> {
    let target: BTreeSet<usize> = emb.chains[j].iter().copied().collect();
    emb.chains[i]
        .iter()
        .flat_map(|&a| topo.neighbors(a).iter().filter(|b| target.contains(b)).map(move |&b| (a.min(b), a.max(b))))
        .min()
}

/// Deterministic triangular clique embedding on Chimera: variable `b t + k`
/// takes the horizontal qubits of row `b` in columns `0..=b` and the vertical
/// qubits of column `b` in rows `b..m`, all with index `k`, giving chains of
/// length `m + 1`.
pub fn clique_embedding(n_logical: usize, topo: &TargetTopology) -> Result<Embedding> {
    let TopologyKind::Chimera { m, t } = topo.kind() else {
        return Err(Error::InvalidArgument("clique embedding needs a Chimera topology".into()));
    };
    if n_logical > m * t {
        return Err(Error::CliqueCapacity { n_logical, required_m: n_logical.div_ceil(t) });
    }
    let q = |row: usize, col: usize, side: usize, k: usize| ((row * m + col) * 2 + side) * t + k;
    let chains = (0..n_logical)
        .map(|v| {
            let (b, k) = (v / t, v % t);
            (0..=b).map(|c| q(b, c, 1, k)).chain((b..m).map(|r| q(r, b, 0, k))).collect()
        })
        .collect();
    Ok(Embedding::new(chains, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinorOptions {
    pub max_tries: usize,
    /// Rip-up-and-reroute passes per try.
    pub max_rounds: usize,
}

impl Default for MinorOptions {
    fn default() -> Self {
        Self { max_tries: 10, max_rounds: 50 }
    }
}

/// Randomised heuristic minor embedding; fails with
/// [`Error::NoEmbedding`] after `max_tries` restarts. On Chimera targets a
/// failed search falls back to a trimmed clique embedding when `n <= m t`.
pub fn minor_embedding(
    logical: &LatticeGraph,
    topo: &TargetTopology,
    seed: u64,
    max_tries: usize,
) -> Result<Embedding> {
    minor_embedding_with(logical, topo, seed, &MinorOptions { max_tries, ..MinorOptions::default() })
}

pub fn minor_embedding_with(
    logical: &LatticeGraph,
    topo: &TargetTopology,
    seed: u64,
    opts: &MinorOptions,
) -> Result<Embedding> {
    let n = logical.n_sites();
    if n == 0 {
        return Ok(Embedding::new(Vec::new(), 1.0));
    }
    if n <= topo.n_physical() {
        for attempt in 0..opts.max_tries {
            if let Some(chains) = MinorSearch::new(logical, topo, seed, attempt as u64).run(opts.max_rounds) {
                let emb = Embedding::new(chains, 1.0);
                if validate_embedding(&emb, logical, topo).is_ok() {
                    return Ok(emb);
                }
            }
        }
        if opts.max_tries > 0 {
            if let Some(emb) = pruned_clique(logical, topo, seed) {
                return Ok(emb);
            }
        }
    }
    Err(Error::NoEmbedding(opts.max_tries))
}

/// Clique chains in random slots, trimmed down to the logical edges.
fn pruned_clique(logical: &LatticeGraph, topo: &TargetTopology, seed: u64) -> Option<Embedding> {
    let TopologyKind::Chimera { m, t } = topo.kind() else {
        return None;
    };
    let slots = clique_embedding(m * t, topo).ok()?;
    let n = logical.n_sites();
    let mut search = MinorSearch::new(logical, topo, seed, u64::MAX);
    let mut order: Vec<usize> = (0..m * t).collect();
    order.shuffle(&mut search.rng);
    for (v, &slot) in order.iter().take(n).enumerate() {
        search.chains[v] = slots.chains()[slot].clone();
        for &q in &search.chains[v] {
            search.usage[q] += 1;
        }
    }
    for v in 0..n {
        search.prune(v);
    }
    let emb = Embedding::new(search.chains, 1.0);
    validate_embedding(&emb, logical, topo).is_ok().then_some(emb)
}

struct MinorSearch<'a> {
    topo: &'a TargetTopology,
    nbrs: Vec<Vec<usize>>,
    chains: Vec<Vec<usize>>,
    usage: Vec<u32>,
    history: Vec<f64>,
    rng: crate::seed::Rng,
}

impl<'a> MinorSearch<'a> {
    fn new(logical: &LatticeGraph, topo: &'a TargetTopology, seed: u64, attempt: u64) -> Self {
        Self {
            topo,
            nbrs: logical.neighbors(),
            chains: vec![Vec::new(); logical.n_sites()],
            usage: vec![0; topo.n_physical()],
            history: vec![0.0; topo.n_physical()],
            rng: stream_rng(seed, attempt),
        }
    }

    fn run(mut self, max_rounds: usize) -> Option<Vec<Vec<usize>>> {
        let n = self.chains.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut self.rng);
        for &v in &order {
            self.place(v, 2.0)?;
        }
        let mut best = usize::MAX;
        let mut stale = 0;
        for round in 0..max_rounds {
            let overlaps = self.usage.iter().filter(|&&u| u > 1).count();
            if overlaps == 0 {
                return Some(self.chains);
            }
            for q in 0..self.usage.len() {
                if self.usage[q] > 1 {
                    self.history[q] += 1.0;
                }
            }
            if overlaps < best {
                best = overlaps;
                stale = 0;
            } else {
                stale += 1;
            }
            let base = 2.0f64.powi((round as i32 + 2).min(60));
            if stale >= 2 {
                // Stuck: free the congested region and rebuild it at once.
                stale = 0;
                best = usize::MAX;
                let mut hot = vec![false; self.usage.len()];
                for q in 0..self.usage.len() {
                    if self.usage[q] > 1 {
                        hot[q] = true;
                        for &w in self.topo.neighbors(q) {
                            hot[w] = true;
                        }
                    }
                }
                let mut torn: Vec<usize> = (0..n).filter(|&v| self.chains[v].iter().any(|&q| hot[q])).collect();
                torn.shuffle(&mut self.rng);
                for &v in &torn {
                    self.rip_up(v);
                }
                for &v in &torn {
                    self.place(v, base)?;
                }
                continue;
            }
            order.shuffle(&mut self.rng);
            for &v in &order {
                self.rip_up(v);
                self.place(v, base)?;
                self.prune(v);
            }
        }
        self.usage.iter().all(|&u| u <= 1).then_some(self.chains)
    }

    /// Drops chain qubits that are needed neither for connectivity nor for
    /// touching a neighbouring chain, shared qubits first.
    fn prune(&mut self, v: usize) {
        loop {
            let chain = self.chains[v].clone();
            if chain.len() <= 1 {
                return;
            }
            let mut candidates = chain.clone();
            candidates.sort_by_key(|&q| Reverse(self.usage[q]));
            let removable = candidates.into_iter().find(|&q| {
                let rest: Vec<usize> = chain.iter().copied().filter(|&p| p != q).collect();
                self.connected(&rest)
                    && self.nbrs[v].iter().all(|&u| self.chains[u].is_empty() || self.touches(&rest, &self.chains[u]))
            });
            match removable {
                Some(q) => {
                    self.chains[v].retain(|&p| p != q);
                    self.usage[q] -= 1;
                }
                None => return,
            }
        }
    }

    fn connected(&self, set: &[usize]) -> bool {
        let members: BTreeSet<usize> = set.iter().copied().collect();
        let mut seen = BTreeSet::from([set[0]]);
        let mut stack = vec![set[0]];
        while let Some(q) = stack.pop() {
            for &w in self.topo.neighbors(q) {
                if members.contains(&w) && seen.insert(w) {
                    stack.push(w);
                }
            }
        }
        seen.len() == members.len()
    }

    fn touches(&self, a: &[usize], b: &[usize]) -> bool {
        a.iter().any(|&q| self.topo.neighbors(q).iter().any(|w| b.binary_search(w).is_ok()))
    }

    fn rip_up(&mut self, v: usize) {
        for &q in &self.chains[v] {
            self.usage[q] -= 1;
        }
        self.chains[v].clear();
    }

    fn weight(&self, q: usize, base: f64) -> f64 {
        (1.0 + self.history[q]) * base.powi(self.usage[q] as i32)
    }

    /// Node-weighted shortest paths from `chain`; `dist[q]` excludes the
    /// weight of `q` itself.
    fn paths_from(&self, chain: &[usize], base: f64) -> (Vec<f64>, Vec<usize>) {
        let n = self.topo.n_physical();
        let mut dist = vec![f64::INFINITY; n];
        let mut pred = vec![usize::MAX; n];
        let mut heap = BinaryHeap::new();
        let in_chain: BTreeSet<usize> = chain.iter().copied().collect();
        for &s in chain {
            dist[s] = 0.0;
            heap.push((Reverse(OrdF64(0.0)), s));
        }
        while let Some((Reverse(OrdF64(d)), a)) = heap.pop() {
            if d > dist[a] {
                continue;
            }
            let step = if in_chain.contains(&a) { 0.0 } else { self.weight(a, base) };
            for &b in self.topo.neighbors(a) {
                let cand = d + step;
                if cand < dist[b] {
                    dist[b] = cand;
                    pred[b] = a;
                    heap.push((Reverse(OrdF64(cand)), b));
                }
            }
        }
        (dist, pred)
    }

    fn place(&mut self, v: usize, base: f64) -> Option<()> {
        let placed: Vec<usize> = self.nbrs[v].iter().copied().filter(|&u| !self.chains[u].is_empty()).collect();
        let n_phys = self.topo.n_physical();
        if placed.is_empty() {
            let best = (0..n_phys).map(|q| self.usage[q]).min()?;
            let free: Vec<usize> = (0..n_phys).filter(|&q| self.usage[q] == best).collect();
            let q = free[self.rng.random_range(0..free.len())];
            self.chains[v] = vec![q];
            self.usage[q] += 1;
            return Some(());
        }
        let searches: Vec<(Vec<f64>, Vec<usize>)> =
            placed.iter().map(|&u| self.paths_from(&self.chains[u], base)).collect();
        let costs = (0..n_phys)
            .map(|q| {
                let cost = self.weight(q, base) + searches.iter().map(|(d, _)| d[q]).sum::<f64>();
                (q, cost)
            })
            .filter(|(_, c)| c.is_finite())
            .collect::<Vec<_>>();
        let best = costs.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
        let ties: Vec<usize> = costs.iter().filter(|c| c.1 <= best * (1.0 + 1e-12)).map(|c| c.0).collect();
        let root = *ties.get(self.rng.random_range(0..ties.len().max(1)))?;
        let mut chain = BTreeSet::from([root]);
        for ((_, pred), &u) in searches.iter().zip(&placed) {
            let target: BTreeSet<usize> = self.chains[u].iter().copied().collect();
            let mut q = root;
            while !target.contains(&q) {
                chain.insert(q);
                q = pred[q];
                if q == usize::MAX {
                    return None;
                }
            }
        }
        for &q in &chain {
            self.usage[q] += 1;
        }
        self.chains[v] = chain.into_iter().collect();
        Some(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Physical Ising problem for `emb`. Fields are split evenly over each
/// chain, each logical coupling sits on the lowest-index coupler between the
/// two chains, and every intra-chain coupler gets `-chain_strength`. The
/// offset is shifted so unbroken states have exactly their logical energy.
pub fn embed_ising(ising: &IsingInstance, emb: &Embedding, topo: &TargetTopology) -> Result<IsingInstance> {
    validate_embedding(emb, &interaction_graph(ising), topo)?;
    if !(emb.chain_strength > 0.0) {
        return Err(Error::InvalidEmbedding(format!("chain strength must be positive, got {}", emb.chain_strength)));
    }
    let mut h = vec![0.0; topo.n_physical()];
    for (v, chain) in emb.chains.iter().enumerate() {
        let share = ising.h()[v] / chain.len() as f64;
        for &q in chain {
            h[q] = share;
        }
    }
    let mut couplings = Vec::new();
    for (i, j, value) in ising.couplings() {
        let (a, b) = chain_coupler(emb, topo, i, j).expect("validated coverage");
        couplings.push((a, b, value));
    }
    let mut owner = vec![usize::MAX; topo.n_physical()];
    for (v, chain) in emb.chains.iter().enumerate() {
        for &q in chain {
            owner[q] = v;
        }
    }
    let mut n_intra = 0usize;
    for (a, b) in topo.couplers() {
        if owner[a] != usize::MAX && owner[a] == owner[b] {
            couplings.push((a, b, -emb.chain_strength));
            n_intra += 1;
        }
    }
    IsingInstance::new(h, &couplings, ising.energy_offset() + emb.chain_strength * n_intra as f64)
}

/// Majority vote of `bits` over `chain`; `None` on a tie.
fn majority(bits: &[u8], chain: &[usize]) -> (Option<u8>, bool) {
    let ones = chain.iter().filter(|&&q| bits[q] == 1).count();
    let zeros = chain.len() - ones;
    let broken = ones > 0 && zeros > 0;
    let value = match ones.cmp(&zeros) {
        std::cmp::Ordering::Greater => Some(1),
        std::cmp::Ordering::Less => Some(0),
        std::cmp::Ordering::Equal => None,
    };
    (value, broken)
}

/// Decodes physical samples chain by chain. Ties are broken by a coin flip
/// drawn from a stream seeded by `seed`. Returns the logical samples with
/// energies from `logical`, and the broken-chain fraction.
pub fn decode_samples<M: EnergyModel + ?Sized>(
    physical: &SampleSet,
    emb: &Embedding,
    logical: &M,
    seed: u64,
) -> Result<(SampleSet, f64)> {
    if logical.n_vars() != emb.n_logical() {
        return Err(Error::LengthMismatch { expected: emb.n_logical(), got: logical.n_vars() });
    }
    let mut rng = stream_rng(seed, u64::MAX);
    let mut counts: BTreeMap<Bitstring, u64> = BTreeMap::new();
    let mut broken = 0u64;
    for record in physical.records() {
        let bits = record.bits.bits();
        let votes: Vec<(Option<u8>, bool)> = emb.chains.iter().map(|c| majority(bits, c)).collect();
        broken += record.count * votes.iter().filter(|v| v.1).count() as u64;
        let tied = votes.iter().any(|v| v.0.is_none());
        let reps = if tied { record.count } else { 1 };
        for _ in 0..reps {
            let decoded: Vec<u8> = votes.iter().map(|v| v.0.unwrap_or_else(|| rng.random_range(0..2u8))).collect();
            *counts.entry(Bitstring::new(decoded)).or_insert(0) += if tied { 1 } else { record.count };
        }
    }
    let records = counts
        .into_iter()
        .map(|(bits, count)| {
            let energy = logical.energy_of(bits.bits());
            SampleRecord { bits, energy, count }
        })
        .collect();
    let samples = SampleSet::from_records(emb.n_logical(), records, physical.timing)?;
    let denom = physical.n_shots_total() * emb.n_logical() as u64;
    let fraction = if denom == 0 { 0.0 } else { broken as f64 / denom as f64 };
    Ok((samples, fraction))
}

/// Simulated annealing on the embedded problem followed by majority-vote
/// decoding into the logical problem.
pub fn sample_embedded<M: EnergyModel + ?Sized>(
    logical: &M,
    physical: &IsingInstance,
    emb: &Embedding,
    schedule: &SaSchedule,
    n_reads: usize,
    seed: u64,
) -> Result<(SampleSet, f64)> {
    let raw = simulated_annealing(&physical.to_qubo(), schedule, n_reads, seed)?;
    decode_samples(&raw, emb, logical, seed)
}
