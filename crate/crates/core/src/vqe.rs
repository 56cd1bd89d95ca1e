//! CVaR-VQE on a noiseless statevector.
//!
//! Each optimizer iteration prepares the ansatz state, draws a fresh batch of
//! shots and scores it with the CVaR objective. After termination the final
//! circuit is sampled once more to produce the reported samples.

use std::time::Instant;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize::{nelder_mead, trust_region, OptimizeOptions};
use crate::qubo::{IsingInstance, SampleSet, Timing};
use crate::seed::{derive_seed, stream_rng};
use crate::statevector::{check_qubits, counts_to_samples, Statevector, MAX_QUBITS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnsatzKind {
    RealAmplitudes,
    Qaoa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Entanglement {
    /// CX gates `(n-2 -> n-1), ..., (0 -> 1)`, control on the lower index.
    #[default]
    ReverseLinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub kind: AnsatzKind,
    pub n_qubits: usize,
    /// Repetitions for RealAmplitudes, layers `p` for QAOA.
    pub reps: usize,
    pub entanglement: Entanglement,
}

impl AnsatzSpec {
    pub fn real_amplitudes(n_qubits: usize, reps: usize) -> Self {
        Self { kind: AnsatzKind::RealAmplitudes, n_qubits, reps, entanglement: Entanglement::ReverseLinear }
    }

    pub fn qaoa(n_qubits: usize, p: usize) -> Self {
        Self { kind: AnsatzKind::Qaoa, n_qubits, reps: p, entanglement: Entanglement::ReverseLinear }
    }

    /// `n (reps + 1)` rotation angles for RealAmplitudes; `[beta_1..beta_p,
    /// gamma_1..gamma_p]` for QAOA.
    pub fn parameter_count(&self) -> usize {
        match self.kind {
            AnsatzKind::RealAmplitudes => self.n_qubits * (self.reps + 1),
            AnsatzKind::Qaoa => 2 * self.reps,
        }
    }

    fn validate(&self, n_spins: usize) -> Result<()> {
        check_qubits(self.n_qubits, MAX_QUBITS)?;
        if self.reps == 0 {
            return Err(Error::InvalidArgument("ansatz needs at least one repetition".into()));
        }
        if self.n_qubits != n_spins {
            return Err(Error::LengthMismatch { expected: n_spins, got: self.n_qubits });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    TrustRegion,
    NelderMead,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveMode {
    /// CVaR of a fresh multinomial sample per iteration.
    #[default]
    Sampled,
    /// CVaR of the exact output distribution (deterministic).
    Analytic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VqeConfig {
    pub shots: u64,
    pub cvar_alpha: f64,
    /// Lower bound on the trust-region radius.
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub objective: ObjectiveMode,
    /// Initial trust-region radius.
    pub rho_begin: f64,
}

impl Default for VqeConfig {
    fn default() -> Self {
        Self {
            shots: 10_000,
            cvar_alpha: 1.0,
            tol: 1e-1,
            max_iters: 250,
            seed: 0,
            optimizer: OptimizerKind::TrustRegion,
            objective: ObjectiveMode::Sampled,
            rho_begin: 1.0,
        }
    }
}

impl VqeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cvar_alpha > 0.0 && self.cvar_alpha <= 1.0) {
            return Err(Error::InvalidArgument(format!("cvar_alpha must lie in (0, 1], got {}", self.cvar_alpha)));
        }
        if self.shots == 0 || self.max_iters == 0 {
            return Err(Error::InvalidArgument("shots and max_iters must be positive".into()));
        }
        if !(self.tol > 0.0) || !(self.rho_begin > 0.0) {
            return Err(Error::InvalidArgument("tol and rho_begin must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub objective: f64,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VqeTrace {
    pub points: Vec<TracePoint>,
    pub converged: bool,
    pub n_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VqeResult {
    pub samples: SampleSet,
    pub trace: VqeTrace,
    pub theta: Vec<f64>,
}

/// Builds the ansatz state for `theta`.
pub fn prepare_state(ansatz: &AnsatzSpec, theta: &[f64], ising: &IsingInstance) -> Result<Statevector> {
    ansatz.validate(ising.n_spins())?;
    check_theta(ansatz, theta)?;
    match ansatz.kind {
        AnsatzKind::RealAmplitudes => real_amplitudes_state(ansatz, theta),
        AnsatzKind::Qaoa => qaoa_state(ansatz, theta, &ising.all_energies()?),
    }
}

fn check_theta(ansatz: &AnsatzSpec, theta: &[f64]) -> Result<()> {
    if theta.len() != ansatz.parameter_count() {
        return Err(Error::ParameterCount { expected: ansatz.parameter_count(), got: theta.len() });
    }
    Ok(())
}

fn real_amplitudes_state(ansatz: &AnsatzSpec, theta: &[f64]) -> Result<Statevector> {
    let n = ansatz.n_qubits;
    let mut s = Statevector::zero(n)?;
    for (q, &t) in theta[..n].iter().enumerate() {
        s.ry(q, t);
    }
    for layer in theta[n..].chunks_exact(n) {
        for c in (0..n.saturating_sub(1)).rev() {
            s.cx(c, c + 1);
        }
        for (q, &t) in layer.iter().enumerate() {
            s.ry(q, t);
        }
    }
    Ok(s)
}

fn qaoa_state(ansatz: &AnsatzSpec, theta: &[f64], energies: &[f64]) -> Result<Statevector> {
    let p = ansatz.reps;
    let (betas, gammas) = theta.split_at(p);
    let mut s = Statevector::uniform(ansatz.n_qubits)?;
    for (&beta, &gamma) in betas.iter().zip(gammas) {
        s.phase(energies, gamma);
        s.rx_all(2.0 * beta);
    }
    Ok(s)
}

fn state_from_table(ansatz: &AnsatzSpec, theta: &[f64], energies: &[f64]) -> Result<Statevector> {
    match ansatz.kind {
        AnsatzKind::RealAmplitudes => real_amplitudes_state(ansatz, theta),
        AnsatzKind::Qaoa => qaoa_state(ansatz, theta, energies),
    }
}

/// Multinomial sample of `state`; `energies[k]` labels basis state `k`
/// (see [`IsingInstance::all_energies`]).
pub fn sample_bitstrings(state: &Statevector, energies: &[f64], shots: u64, seed: u64) -> Result<SampleSet> {
    if energies.len() != state.amplitudes().len() {
        return Err(Error::LengthMismatch { expected: state.amplitudes().len(), got: energies.len() });
    }
    Ok(state.sample(energies, shots, seed))
}

/// Mean of the lowest `ceil(alpha * shots)` shot energies.
pub fn cvar_objective(samples: &SampleSet, alpha: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::UndefinedMetric("CVaR of an empty sample set".into()));
    }
    let pairs: Vec<(f64, u64)> = samples.records().iter().map(|r| (r.energy, r.count)).collect();
    cvar_of_counts(pairs, samples.n_shots_total(), alpha)
}

fn cvar_of_counts(mut pairs: Vec<(f64, u64)>, total: u64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let k = ((alpha * total as f64).ceil() as u64).clamp(1, total);
    let (mut left, mut sum) = (k, 0.0);
    for (e, c) in pairs {
        let take = c.min(left);
        sum += e * take as f64;
        left -= take;
        if left == 0 {
            break;
        }
    }
    Ok(sum / k as f64)
}

/// CVaR of the exact distribution: the expected energy over the lowest
/// `alpha` probability mass.
pub fn cvar_exact(state: &Statevector, energies: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    let probs = state.probabilities();
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| energies[a].total_cmp(&energies[b]));
    let (mut mass, mut sum) = (0.0, 0.0);
    for k in order {
        let take = probs[k].min(alpha - mass);
        if take <= 0.0 {
            break;
        }
        sum += take * energies[k];
        mass += take;
    }
    Ok(sum / mass)
}

/// Optimises the ansatz parameters from a seeded uniform start in `[-pi, pi)`.
pub fn run_vqe(ising: &IsingInstance, ansatz: &AnsatzSpec, config: &VqeConfig) -> Result<VqeResult> {
    let mut rng = stream_rng(config.seed, 0);
    let theta0: Vec<f64> =
        (0..ansatz.parameter_count()).map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)).collect();
    run_vqe_from(ising, ansatz, config, &theta0)
}

/// As [`run_vqe`] from a given starting point.
pub fn run_vqe_from(
    ising: &IsingInstance,
    ansatz: &AnsatzSpec,
    config: &VqeConfig,
    theta0: &[f64],
) -> Result<VqeResult> {
    config.validate()?;
    ansatz.validate(ising.n_spins())?;
    check_theta(ansatz, theta0)?;
    let energies = ising.all_energies()?;
    let n = ising.n_spins();

    let start = Instant::now();
    let mut points = Vec::new();
    let mut failure = None;
    let mut iteration = 0u64;
    let objective = |theta: &[f64]| -> f64 {
        iteration += 1;
        let value = state_from_table(ansatz, theta, &energies).and_then(|state| match config.objective {
            ObjectiveMode::Sampled => {
                let counts = state.sample_counts(config.shots, derive_seed(config.seed, iteration));
                let pairs = counts.iter().map(|&(k, c)| (energies[k], c)).collect();
                cvar_of_counts(pairs, config.shots, config.cvar_alpha)
            }
            ObjectiveMode::Analytic => cvar_exact(&state, &energies, config.cvar_alpha),
        });
        match value {
            Ok(v) => {
                points.push(TracePoint { objective: v, elapsed_s: start.elapsed().as_secs_f64() });
                v
            }
            Err(e) => {
                failure.get_or_insert(e);
                f64::INFINITY
            }
        }
    };
    let opts = OptimizeOptions {
        rho_begin: config.rho_begin.max(config.tol),
        rho_end: config.tol,
        max_evals: config.max_iters,
    };
    let result = match config.optimizer {
        OptimizerKind::TrustRegion => trust_region(objective, theta0, &opts),
        OptimizerKind::NelderMead => nelder_mead(objective, theta0, &opts),
    };
    if let Some(e) = failure {
        return Err(e);
    }

    let state = state_from_table(ansatz, &result.x, &energies)?;
    let counts = state.sample_counts(config.shots, derive_seed(config.seed, u64::MAX));
    let mut samples = counts_to_samples(n, &counts, &energies);
    samples.timing = Timing::device(start.elapsed().as_secs_f64());
    let n_iterations = points.len();
    Ok(VqeResult { samples, trace: VqeTrace { points, converged: result.converged, n_iterations }, theta: result.x })
}
