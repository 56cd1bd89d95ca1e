//! Repeated experiments, grid search, scaling runs and report emission.
//!
//! An experiment is a pure function of its record's method, instance,
//! resolved hyperparameters and seed. Records are stored one JSON object per
//! line; wall-clock fields can be masked for byte-level comparisons.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::sync::mpsc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anneal::{anneal_sample, min_steps, AnnealConfig};
use crate::classical::{
    brute_force, random_sampling, simulated_annealing_with, Readout, SaOptions, SaSchedule, SweepOrder,
};
use crate::embedding::{
    clique_embedding, embed_ising, interaction_graph, minor_embedding, sample_embedded, Embedding, TargetTopology,
};
use crate::error::{Error, Result};
use crate::lattice::LatticeGraph;
use crate::metrics::{self, ExperimentMetrics, ExperimentTiming, MetricReport};
use crate::qubo::{constrained_extrema, ConstrainedExtrema, QuboInstance, SampleSet};
use crate::seed::derive_seed;
use crate::vqe::{run_vqe, AnsatzSpec, ObjectiveMode, OptimizerKind, VqeConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Brute,
    Random,
    Sa,
    Vqe,
    AnnealSim,
    EmbeddedSa,
}

impl Method {
    pub const ALL: [Method; 6] =
        [Method::Brute, Method::Random, Method::Sa, Method::Vqe, Method::AnnealSim, Method::EmbeddedSa];

    pub fn name(self) -> &'static str {
        match self {
            Method::Brute => "brute",
            Method::Random => "random",
            Method::Sa => "sa",
            Method::Vqe => "vqe",
            Method::AnnealSim => "anneal-sim",
            Method::EmbeddedSa => "embedded-sa",
        }
    }

    /// Whether the method emulates a quantum device (its solver time is
    /// reported as QPU time).
    pub fn is_quantum(self) -> bool {
        matches!(self, Method::Vqe | Method::AnnealSim | Method::EmbeddedSa)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

/// A single hyperparameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
}

impl ParamValue {
    /// Parses `true`/`false`, integers and floats; anything else is text.
    pub fn parse(s: &str) -> Self {
        let s = s.trim();
        match s {
            "true" => return ParamValue::Bool(true),
            "false" => return ParamValue::Bool(false),
            _ => {}
        }
        if let Ok(i) = s.parse::<i64>() {
            return ParamValue::Int(i);
        }
        if let Ok(x) = s.parse::<f64>() {
            return ParamValue::Float(x);
        }
        ParamValue::Text(s.to_string())
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            ParamValue::Int(i) => Some(i as f64),
            ParamValue::Float(x) => Some(x),
            _ => None,
        }
    }

    pub fn as_u64(&self) -> Option<u64> {
        match *self {
            ParamValue::Int(i) => u64::try_from(i).ok(),
            ParamValue::Float(x) if x >= 0.0 && x.fract() == 0.0 && x < 2f64.powi(63) => Some(x as u64),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            ParamValue::Text(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Bool(b) => write!(f, "{b}"),
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Float(x) => write!(f, "{x}"),
            ParamValue::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for ParamValue {
    fn from(x: f64) -> Self {
        ParamValue::Float(x)
    }
}

impl From<i64> for ParamValue {
    fn from(i: i64) -> Self {
        ParamValue::Int(i)
    }
}

impl From<&str> for ParamValue {
    fn from(s: &str) -> Self {
        ParamValue::Text(s.to_string())
    }
}

pub type Hyperparams = BTreeMap<String, ParamValue>;

/// `k=v;k=v` rendering in key order.
pub fn format_hyperparams(params: &Hyperparams) -> String {
    params.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
}

fn params_of<const N: usize>(pairs: [(&str, ParamValue); N]) -> Hyperparams {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Defaults for every hyperparameter `method` accepts on an `n_vars`
/// instance.
pub fn default_hyperparams(method: Method, n_vars: usize) -> Hyperparams {
    let sa = |extra: Hyperparams| {
        let mut p = params_of([
            ("reads", 1000.into()),
            ("sweeps", 1000.into()),
            ("beta_min", 0.1.into()),
            ("beta_max", 10.0.into()),
        ]);
        p.extend(extra);
        p
    };
    match method {
        Method::Brute => Hyperparams::new(),
        Method::Random => params_of([("shots", 1000.into())]),
        Method::Sa => sa(params_of([("order", "random".into()), ("readout", "final".into())])),
        Method::Vqe => params_of([
            ("ansatz", "realamp".into()),
            ("reps", 1.into()),
            ("alpha", 1.0.into()),
            ("shots", 10_000.into()),
            ("tol", 0.1.into()),
            ("max_iters", 250.into()),
            ("optimizer", "trust-region".into()),
            ("objective", "sampled".into()),
            ("rho_begin", 1.0.into()),
            ("epsilon", 0.05.into()),
        ]),
        Method::AnnealSim => params_of([
            ("anneal_time", 10.0.into()),
            ("steps", (min_steps(10.0) as i64).into()),
            ("shots", 1000.into()),
        ]),
        Method::EmbeddedSa => sa(params_of([
            ("topology", format!("chimera:{},4", n_vars.div_ceil(4).max(1)).as_str().into()),
            ("embedding", "clique".into()),
            ("chain_strength", 3.0.into()),
            ("tries", 10.into()),
        ])),
    }
}

/// Fills defaults and checks every value; unknown keys and ill-typed values
/// are configuration errors.
pub fn resolve_hyperparams(method: Method, n_vars: usize, overrides: &Hyperparams) -> Result<Hyperparams> {
    let mut params = default_hyperparams(method, n_vars);
    for (k, v) in overrides {
        if !params.contains_key(k) {
            return Err(Error::Config(format!("unknown hyperparameter '{k}' for method {method}")));
        }
        params.insert(k.clone(), v.clone());
    }
    if method == Method::AnnealSim && overrides.contains_key("anneal_time") && !overrides.contains_key("steps") {
        let t = Lookup(&params).f64("anneal_time")?;
        params.insert("steps".into(), (min_steps(t) as i64).into());
    }
    Solver::from_params(method, &params)?;
    Ok(params)
}

struct Lookup<'a>(&'a Hyperparams);

impl Lookup<'_> {
    fn get(&self, key: &str) -> Result<&ParamValue> {
        self.0.get(key).ok_or_else(|| Error::Config(format!("missing hyperparameter '{key}'")))
    }

    fn bad(key: &str, v: &ParamValue, want: &str) -> Error {
        Error::Config(format!("hyperparameter '{key}' = {v} is not {want}"))
    }

    fn f64(&self, key: &str) -> Result<f64> {
        let v = self.get(key)?;
        v.as_f64().filter(|x| x.is_finite()).ok_or_else(|| Self::bad(key, v, "a number"))
    }

    fn u64(&self, key: &str) -> Result<u64> {
        let v = self.get(key)?;
        v.as_u64().ok_or_else(|| Self::bad(key, v, "a non-negative integer"))
    }

    fn usize(&self, key: &str) -> Result<usize> {
        Ok(self.u64(key)? as usize)
    }

    fn text(&self, key: &str) -> Result<&str> {
        let v = self.get(key)?;
        v.as_str().ok_or_else(|| Self::bad(key, v, "text"))
    }

    fn choice<T: Copy>(&self, key: &str, options: &[(&str, T)]) -> Result<T> {
        let s = self.text(key)?;
        options.iter().find(|(name, _)| *name == s).map(|(_, t)| *t).ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|o| o.0).collect();
            Error::Config(format!("hyperparameter '{key}' must be one of {}, got '{s}'", names.join("/")))
        })
    }

    fn schedule(&self) -> Result<SaSchedule> {
        SaSchedule::geometric(self.f64("beta_min")?, self.f64("beta_max")?, self.usize("sweeps")?).map_err(as_config)
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EmbedMode {
    Clique,
    Minor,
}

/// Parses `chimera:m,t` into `(m, t)`.
pub fn parse_chimera(spec: &str) -> Result<(usize, usize)> {
    let bad = || Error::Config(format!("topology '{spec}' is not of the form chimera:m,t"));
    let rest = spec.strip_prefix("chimera:").ok_or_else(bad)?;
    let (m, t) = rest.split_once(',').ok_or_else(bad)?;
    Ok((m.trim().parse().map_err(|_| bad())?, t.trim().parse().map_err(|_| bad())?))
}

/// Validated solver settings derived from a resolved hyperparameter map.
#[derive(Debug, Clone)]
enum Solver {
    Brute,
    Random {
        shots: u64,
    },
    Sa {
        schedule: SaSchedule,
        reads: usize,
        options: SaOptions,
    },
    Vqe {
        qaoa: bool,
        reps: usize,
        config: VqeConfig,
        epsilon: f64,
    },
    AnnealSim {
        config: AnnealConfig,
    },
    EmbeddedSa {
        chimera: (usize, usize),
        mode: EmbedMode,
        chain_strength: f64,
        tries: usize,
        schedule: SaSchedule,
        reads: usize,
    },
}

impl Solver {
    fn from_params(method: Method, params: &Hyperparams) -> Result<Self> {
        let p = Lookup(params);
        let positive = |key: &str, v: u64| {
            if v == 0 {
                Err(Error::Config(format!("hyperparameter '{key}' must be positive")))
            } else {
                Ok(v)
            }
        };
        Ok(match method {
            Method::Brute => Solver::Brute,
            Method::Random => Solver::Random { shots: positive("shots", p.u64("shots")?)? },
            Method::Sa => Solver::Sa {
                schedule: p.schedule()?,
                reads: positive("reads", p.u64("reads")?)? as usize,
                options: SaOptions {
                    order: p
                        .choice("order", &[("random", SweepOrder::Random), ("sequential", SweepOrder::Sequential)])?,
                    readout: p.choice("readout", &[("final", Readout::FinalState), ("best", Readout::BestSeen)])?,
                    ..SaOptions::default()
                },
            },
            Method::Vqe => {
                let config = VqeConfig {
                    shots: p.u64("shots")?,
                    cvar_alpha: p.f64("alpha")?,
                    tol: p.f64("tol")?,
                    max_iters: p.usize("max_iters")?,
                    seed: 0,
                    optimizer: p.choice(
                        "optimizer",
                        &[("trust-region", OptimizerKind::TrustRegion), ("nelder-mead", OptimizerKind::NelderMead)],
                    )?,
                    objective: p.choice(
                        "objective",
                        &[("sampled", ObjectiveMode::Sampled), ("analytic", ObjectiveMode::Analytic)],
                    )?,
                    rho_begin: p.f64("rho_begin")?,
                };
                config.validate().map_err(as_config)?;
                Solver::Vqe {
                    qaoa: p.choice("ansatz", &[("realamp", false), ("qaoa", true)])?,
                    reps: positive("reps", p.u64("reps")?)? as usize,
                    config,
                    epsilon: p.f64("epsilon")?,
                }
            }
            Method::AnnealSim => {
                let config = AnnealConfig {
                    anneal_time: p.f64("anneal_time")?,
                    n_steps: p.usize("steps")?,
                    shots: p.u64("shots")?,
                    seed: 0,
                };
                // A step count below the stability rule is a guard, raised per run.
                if let Err(e @ Error::InvalidArgument(_)) = config.validate() {
                    return Err(as_config(e));
                }
                Solver::AnnealSim { config }
            }
            Method::EmbeddedSa => {
                let chain_strength = p.f64("chain_strength")?;
                if !(chain_strength > 0.0) {
                    return Err(Error::Config("chain_strength must be positive".into()));
                }
                Solver::EmbeddedSa {
                    chimera: parse_chimera(p.text("topology")?)?,
                    mode: p.choice("embedding", &[("clique", EmbedMode::Clique), ("minor", EmbedMode::Minor)])?,
                    chain_strength,
                    tries: positive("tries", p.u64("tries")?)? as usize,
                    schedule: p.schedule()?,
                    reads: positive("reads", p.u64("reads")?)? as usize,
                }
            }
        })
    }
}

/// Where the instance graph comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphSource {
    Supercell { dim: usize },
    EdgeList { n_sites: usize, edges: Vec<(usize, usize)> },
}

/// Self-contained instance descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub graph: GraphSource,
    pub kappa: f64,
    pub lambda: f64,
    pub n_vacancies: usize,
}

impl InstanceSpec {
    pub fn supercell(dim: usize, kappa: f64, lambda: f64, n_vacancies: usize) -> Self {
        Self { graph: GraphSource::Supercell { dim }, kappa, lambda, n_vacancies }
    }

    pub fn from_graph(graph: &LatticeGraph, kappa: f64, lambda: f64, n_vacancies: usize) -> Self {
        let source = match graph.supercell_dim() {
            Some(dim) => GraphSource::Supercell { dim },
            None => GraphSource::EdgeList { n_sites: graph.n_sites(), edges: graph.edges().collect() },
        };
        Self { graph: source, kappa, lambda, n_vacancies }
    }

    /// Recovers the descriptor of a penalty QUBO by reading the graph off
    /// its off-diagonal entries. The rebuilt instance must match entry for
    /// entry.
    pub fn from_qubo(qubo: &QuboInstance) -> Result<Self> {
        let p = qubo.params().ok_or_else(|| Error::InvalidArgument("QUBO carries no penalty parameters".into()))?;
        let n = qubo.n_vars();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let a = (2.0 * p.lambda - qubo.get(i, j)) / p.kappa;
                if (a - 1.0).abs() <= crate::ENERGY_TOL {
                    edges.push((i, j));
                } else if a.abs() > crate::ENERGY_TOL {
                    return Err(Error::InvalidArgument(format!("entry ({i}, {j}) is not a penalty coupling")));
                }
            }
        }
        let graph = LatticeGraph::from_edges(n, edges)?;
        let dim = ((n / 2) as f64).sqrt().round() as usize;
        let graph = match LatticeGraph::supercell(dim) {
            Ok(cell) if cell.n_sites() == n && cell.edges().eq(graph.edges()) => cell,
            _ => graph,
        };
        let spec = Self::from_graph(&graph, p.kappa, p.lambda, n - p.n_carbon);
        let rebuilt = QuboInstance::penalty(&graph, p.kappa, p.lambda, n - p.n_carbon)?;
        let same = (0..n).all(|i| (i..n).all(|j| (rebuilt.get(i, j) - qubo.get(i, j)).abs() <= crate::ENERGY_TOL))
            && (rebuilt.constant_offset() - qubo.constant_offset()).abs() <= crate::ENERGY_TOL;
        if !same {
            return Err(Error::InvalidArgument("QUBO does not match its penalty parameters".into()));
        }
        Ok(spec)
    }

    pub fn supercell_dim(&self) -> Option<usize> {
        match self.graph {
            GraphSource::Supercell { dim } => Some(dim),
            GraphSource::EdgeList { .. } => None,
        }
    }

    pub fn n_vars(&self) -> usize {
        match &self.graph {
            GraphSource::Supercell { dim } => 2 * dim * dim,
            GraphSource::EdgeList { n_sites, .. } => *n_sites,
        }
    }

    pub fn lattice(&self) -> Result<LatticeGraph> {
        match &self.graph {
            GraphSource::Supercell { dim } => LatticeGraph::supercell(*dim),
            GraphSource::EdgeList { n_sites, edges } => LatticeGraph::from_edges(*n_sites, edges.iter().copied()),
        }
    }

    /// Builds the QUBO and, when the feasible space is small enough to
    /// enumerate, its constrained extrema.
    pub fn build(&self) -> Result<Problem> {
        let graph = self.lattice()?;
        let qubo = QuboInstance::penalty(&graph, self.kappa, self.lambda, self.n_vacancies)?;
        let extrema = match constrained_extrema(&qubo) {
            Ok(x) => Some(x),
            Err(Error::Guard(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(Problem { spec: self.clone(), graph, qubo, extrema })
    }

    /// Applies an instance-level override (`kappa`, `lambda`, `n_vacancies`);
    /// returns `false` for other keys.
    fn apply(&mut self, key: &str, value: &ParamValue) -> Result<bool> {
        let bad = || Error::Config(format!("instance parameter '{key}' = {value} is invalid"));
        match key {
            "kappa" => self.kappa = value.as_f64().ok_or_else(bad)?,
            "lambda" => self.lambda = value.as_f64().ok_or_else(bad)?,
            "n_vacancies" => self.n_vacancies = value.as_u64().ok_or_else(bad)? as usize,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

/// A built instance ready for solving.
#[derive(Debug, Clone)]
pub struct Problem {
    pub spec: InstanceSpec,
    pub graph: LatticeGraph,
    pub qubo: QuboInstance,
    pub extrema: Option<ConstrainedExtrema>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Guard,
    NoEmbedding,
    Solver,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub kind: FailureKind,
    pub message: String,
}

impl From<&Error> for Failure {
    fn from(e: &Error) -> Self {
        let kind = match e {
            Error::Guard(_) => FailureKind::Guard,
            Error::NoEmbedding(_) | Error::CliqueCapacity { .. } => FailureKind::NoEmbedding,
            _ => FailureKind::Solver,
        };
        Self { kind, message: e.to_string() }
    }
}

/// One persisted experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub method: Method,
    pub instance: InstanceSpec,
    pub hyperparams: Hyperparams,
    pub base_seed: u64,
    pub experiment: usize,
    pub seed: u64,
    /// `None` for a successful run.
    pub failure: Option<Failure>,
    pub metrics: Option<ExperimentMetrics>,
    pub timing: ExperimentTiming,
    /// Pooled `(energy, shots)` before and after post-selection.
    pub histogram: Vec<(f64, u64)>,
    pub histogram_post: Vec<(f64, u64)>,
    /// Per-iteration objective values of variational runs.
    pub trace: Vec<f64>,
    pub started_unix_ms: u64,
}

impl ExperimentRecord {
    pub fn is_ok(&self) -> bool {
        self.failure.is_none()
    }

    /// Copy with every wall-clock field zeroed.
    pub fn masked(&self) -> Self {
        let zero = |t: Option<f64>| t.map(|_| 0.0);
        Self {
            timing: ExperimentTiming {
                user_runtime_s: 0.0,
                qpu_time_s: zero(self.timing.qpu_time_s),
                tt_eps_s: zero(self.timing.tt_eps_s),
            },
            started_unix_ms: 0,
            ..self.clone()
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("records serialise")
    }
}

/// Raw output of one solver invocation.
struct RunOutput {
    samples: SampleSet,
    chain_break_fraction: Option<f64>,
    /// `(elapsed seconds, objective)` per iteration.
    trace: Vec<(f64, f64)>,
    epsilon: Option<f64>,
}

fn run_solver(solver: &Solver, problem: &Problem, seed: u64) -> Result<RunOutput> {
    let plain = |samples| RunOutput { samples, chain_break_fraction: None, trace: Vec::new(), epsilon: None };
    match solver {
        Solver::Brute => brute_force(&problem.qubo).map(|r| plain(r.to_samples(&problem.qubo))),
        Solver::Random { shots } => Ok(plain(random_sampling(&problem.qubo, *shots, seed))),
        Solver::Sa { schedule, reads, options } => {
            simulated_annealing_with(&problem.qubo, schedule, *reads, seed, options).map(plain)
        }
        Solver::Vqe { qaoa, reps, config, epsilon } => {
            let ising = problem.qubo.to_ising();
            let n = ising.n_spins();
            let ansatz = if *qaoa { AnsatzSpec::qaoa(n, *reps) } else { AnsatzSpec::real_amplitudes(n, *reps) };
            let result = run_vqe(&ising, &ansatz, &VqeConfig { seed, ..*config })?;
            Ok(RunOutput {
                samples: result.samples,
                chain_break_fraction: None,
                trace: result.trace.points.iter().map(|p| (p.elapsed_s, p.objective)).collect(),
                epsilon: Some(*epsilon),
            })
        }
        Solver::AnnealSim { config } => {
            anneal_sample(&problem.qubo.to_ising(), &AnnealConfig { seed, ..*config }).map(plain)
        }
        Solver::EmbeddedSa { chimera: (m, t), mode, chain_strength, tries, schedule, reads } => {
            let start = Instant::now();
            let topo = TargetTopology::chimera(*m, *t)?;
            let ising = problem.qubo.to_ising();
            let emb: Embedding = match mode {
                EmbedMode::Clique => clique_embedding(ising.n_spins(), &topo)?,
                EmbedMode::Minor => minor_embedding(&interaction_graph(&ising), &topo, seed, *tries)?,
            }
            .with_chain_strength(*chain_strength);
            let physical = embed_ising(&ising, &emb, &topo)?;
            let encoding_s = start.elapsed().as_secs_f64();
            let (mut samples, cbf) = sample_embedded(&problem.qubo, &physical, &emb, schedule, *reads, seed)?;
            samples.timing.encoding_s = encoding_s;
            Ok(RunOutput { samples, chain_break_fraction: Some(cbf), trace: Vec::new(), epsilon: None })
        }
    }
}

fn unix_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

/// Runs experiment `index` of a batch. Solver errors become failure
/// records.
fn run_one(
    method: Method,
    solver: &Solver,
    problem: &Problem,
    hyperparams: &Hyperparams,
    base_seed: u64,
    index: usize,
) -> ExperimentRecord {
    let seed = derive_seed(base_seed, index as u64);
    let mut record = ExperimentRecord {
        method,
        instance: problem.spec.clone(),
        hyperparams: hyperparams.clone(),
        base_seed,
        experiment: index,
        seed,
        failure: None,
        metrics: None,
        timing: ExperimentTiming::default(),
        histogram: Vec::new(),
        histogram_post: Vec::new(),
        trace: Vec::new(),
        started_unix_ms: unix_ms(),
    };
    let out = match run_solver(solver, problem, seed) {
        Ok(out) => out,
        Err(e) => {
            record.failure = Some(Failure::from(&e));
            return record;
        }
    };
    let n_vac = problem.spec.n_vacancies;
    let post = metrics::post_select(&out.samples, n_vac);
    record.histogram = out.samples.energy_histogram();
    record.histogram_post = post.energy_histogram();
    record.trace = out.trace.iter().map(|p| p.1).collect();
    record.timing = ExperimentTiming {
        user_runtime_s: out.samples.timing.user_runtime(),
        qpu_time_s: method.is_quantum().then_some(out.samples.timing.device_s),
        tt_eps_s: None,
    };
    if let Some(x) = problem.extrema {
        match ExperimentMetrics::evaluate(&out.samples, x.e_min, x.e_max, n_vac) {
            Ok(mut m) => {
                m.chain_break_fraction = out.chain_break_fraction;
                record.metrics = Some(m);
            }
            Err(e) => record.failure = Some(Failure::from(&e)),
        }
        if let Some(eps) = out.epsilon {
            let mut best = f64::INFINITY;
            let running: Vec<(f64, f64)> = out
                .trace
                .iter()
                .map(|&(t, e)| {
                    best = best.min(e);
                    (t, best)
                })
                .collect();
            record.timing.tt_eps_s = metrics::time_to_epsilon(&running, x.e_min, eps);
        }
    }
    record
}

/// Runs `n_experiments` independent repeats with seeds
/// `derive_seed(base_seed, index)`, in parallel. Per-run solver failures are
/// recorded in place; invalid hyperparameters abort the batch.
pub fn run_experiments(
    method: Method,
    problem: &Problem,
    hyperparams: &Hyperparams,
    n_experiments: usize,
    base_seed: u64,
) -> Result<Vec<ExperimentRecord>> {
    let mut out = Vec::with_capacity(n_experiments);
    run_experiments_with_sink(method, problem, hyperparams, n_experiments, base_seed, |r| {
        out.push(r.clone());
        Ok(())
    })?;
    Ok(out)
}

/// As [`run_experiments`], handing each completed record to `sink` in
/// experiment order from the calling thread.
pub fn run_experiments_with_sink(
    method: Method,
    problem: &Problem,
    hyperparams: &Hyperparams,
    n_experiments: usize,
    base_seed: u64,
    mut sink: impl FnMut(&ExperimentRecord) -> Result<()>,
) -> Result<()> {
    let params = resolve_hyperparams(method, problem.spec.n_vars(), hyperparams)?;
    let solver = Solver::from_params(method, &params)?;
    let (tx, rx) = mpsc::channel::<ExperimentRecord>();
    std::thread::scope(|scope| {
        let (solver, params) = (&solver, &params);
        scope.spawn(move || {
            (0..n_experiments).into_par_iter().for_each_with(tx, |tx, i| {
                // The receiver only disappears after a sink error.
                let _ = tx.send(run_one(method, solver, problem, params, base_seed, i));
            });
        });
        let mut pending = BTreeMap::new();
        let mut next = 0;
        for record in rx {
            pending.insert(record.experiment, record);
            while let Some(r) = pending.remove(&next) {
                sink(&r)?;
                next += 1;
            }
        }
        Ok(())
    })
}

fn run_serial(
    method: Method,
    problem: &Problem,
    params: &Hyperparams,
    n: usize,
    base_seed: u64,
) -> Result<Vec<ExperimentRecord>> {
    let params = resolve_hyperparams(method, problem.spec.n_vars(), params)?;
    let solver = Solver::from_params(method, &params)?;
    Ok((0..n).map(|i| run_one(method, &solver, problem, &params, base_seed, i)).collect())
}

/// Aggregate over the successful records.
pub fn aggregate(records: &[ExperimentRecord]) -> Result<MetricReport> {
    let ok: Vec<(ExperimentMetrics, ExperimentTiming)> =
        records.iter().filter(|r| r.is_ok()).filter_map(|r| r.metrics.clone().map(|m| (m, r.timing))).collect();
    MetricReport::aggregate(&ok)
}

pub fn to_jsonl(records: &[ExperimentRecord], mask_timing: bool) -> String {
    let mut out = String::new();
    for r in records {
        let line = if mask_timing { r.masked().to_json_line() } else { r.to_json_line() };
        out.push_str(&line);
        out.push('\n');
    }
    out
}

pub fn read_jsonl(text: &str) -> Result<Vec<ExperimentRecord>> {
    text.lines().filter(|l| !l.trim().is_empty()).map(|l| serde_json::from_str(l).map_err(Error::from)).collect()
}

/// Append-only JSONL file.
pub struct JsonlStore {
    file: std::fs::File,
    mask_timing: bool,
}

impl JsonlStore {
    pub fn open(path: &Path, mask_timing: bool) -> Result<Self> {
        let file = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { file, mask_timing })
    }

    pub fn append(&mut self, record: &ExperimentRecord) -> Result<()> {
        let r = if self.mask_timing { record.masked() } else { record.clone() };
        writeln!(self.file, "{}", r.to_json_line())?;
        self.file.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridObjective {
    #[default]
    MaxMeanPs,
    MinRuntime,
}

pub const DEFAULT_GRID_BUDGET: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Parameter name to candidate values. `kappa`, `lambda` and
    /// `n_vacancies` vary the instance; other names are hyperparameters.
    pub axes: BTreeMap<String, Vec<ParamValue>>,
    pub objective: GridObjective,
    pub repeats_per_point: usize,
    /// Upper bound on the number of grid points.
    pub budget: usize,
}

impl GridSpec {
    pub fn new(axes: BTreeMap<String, Vec<ParamValue>>, repeats_per_point: usize) -> Self {
        Self { axes, objective: GridObjective::MaxMeanPs, repeats_per_point, budget: DEFAULT_GRID_BUDGET }
    }

    pub fn n_points(&self) -> usize {
        self.axes.values().map(Vec::len).product()
    }

    /// Cartesian product in key order, last key varying fastest.
    pub fn points(&self) -> Result<Vec<Hyperparams>> {
        if self.axes.is_empty() || self.axes.values().any(Vec::is_empty) {
            return Err(Error::Config("grid needs at least one value on every axis".into()));
        }
        if self.repeats_per_point == 0 {
            return Err(Error::Config("repeats_per_point must be positive".into()));
        }
        if self.n_points() > self.budget {
            return Err(Error::Config(format!("{} grid points exceed the budget of {}", self.n_points(), self.budget)));
        }
        let mut points = vec![Hyperparams::new()];
        for (key, values) in &self.axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |v| {
                        let mut q = p.clone();
                        q.insert(key.clone(), v.clone());
                        q
                    })
                })
                .collect();
        }
        Ok(points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub params: Hyperparams,
    /// `None` when no repeat produced metrics.
    pub report: Option<MetricReport>,
    /// Fraction of all shots that are feasible and at the constrained
    /// minimum; the ranking score.
    pub ps_feasible: Option<f64>,
    pub n_failed: usize,
}

#[derive(Debug, Clone)]
pub struct GridResult {
    /// Index into `points`; `None` if no point produced metrics.
    pub best: Option<usize>,
    pub points: Vec<GridPoint>,
    pub records: Vec<ExperimentRecord>,
}

impl GridResult {
    pub fn best_point(&self) -> Option<&GridPoint> {
        self.best.map(|i| &self.points[i])
    }

    /// One row per grid point.
    pub fn surface_csv(&self) -> String {
        let keys: Vec<&String> = self.points.first().map(|p| p.params.keys().collect()).unwrap_or_default();
        let mut out = String::new();
        let header: Vec<String> = keys.iter().map(|k| csv_field(k)).collect();
        let _ = writeln!(out, "{},mean_ps,ps_sigma,ps_post,ps_feasible,mean_user_runtime_s,n_failed", header.join(","));
        for p in &self.points {
            let vals: Vec<String> = keys.iter().map(|k| csv_field(&p.params[*k].to_string())).collect();
            let r = p.report.as_ref();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                vals.join(","),
                opt(r.map(|r| r.ps)),
                opt(r.map(|r| r.sigma)),
                opt(r.and_then(|r| r.ps_post)),
                opt(p.ps_feasible),
                opt(r.map(|r| r.user_runtime_s)),
                p.n_failed
            );
        }
        out
    }
}

/// Evaluates every grid point with `repeats_per_point` experiments seeded
/// from `base_seed` (the same seeds at every point). The best point has the
/// highest probability of sampling a feasible ground state, then the lower
/// mean user runtime, then comes first in grid order;
/// [`GridObjective::MinRuntime`] swaps the first two keys.
pub fn grid_search(
    method: Method,
    instance: &InstanceSpec,
    base: &Hyperparams,
    grid: &GridSpec,
    base_seed: u64,
) -> Result<GridResult> {
    let mut points = Vec::new();
    let mut records = Vec::new();
    for params in grid.points()? {
        let mut spec = instance.clone();
        let mut hp = base.clone();
        for (k, v) in &params {
            if !spec.apply(k, v)? {
                hp.insert(k.clone(), v.clone());
            }
        }
        let problem = spec.build()?;
        let batch = run_experiments(method, &problem, &hp, grid.repeats_per_point, base_seed)?;
        points.push(GridPoint {
            params,
            report: aggregate(&batch).ok(),
            ps_feasible: feasible_ground_fraction(&batch),
            n_failed: batch.iter().filter(|r| !r.is_ok()).count(),
        });
        records.extend(batch);
    }
    let best = best_index(&points, grid.objective);
    Ok(GridResult { best, points, records })
}

/// Pooled fraction of shots that survive post-selection at the ground
/// energy. Unlike Ps it ignores infeasible states that happen to share the
/// ground energy when the penalty is weak.
fn feasible_ground_fraction(records: &[ExperimentRecord]) -> Option<f64> {
    let (hits, shots) = records
        .iter()
        .filter(|r| r.is_ok())
        .filter_map(|r| r.metrics.as_ref())
        .fold((0.0, 0u64), |(h, n), m| (h + m.ps_post.unwrap_or(0.0) * m.n_shots_post as f64, n + m.n_shots));
    (shots > 0).then(|| hits / shots as f64)
}

fn best_index(points: &[GridPoint], objective: GridObjective) -> Option<usize> {
    let scored: Vec<(usize, f64, f64)> = points
        .iter()
        .enumerate()
        .filter_map(|(i, p)| Some((i, p.ps_feasible?, p.report.as_ref()?.user_runtime_s)))
        .collect();
    scored
        .into_iter()
        .min_by(|a, b| {
            let (first, second) = match objective {
                GridObjective::MaxMeanPs => (b.1.total_cmp(&a.1), a.2.total_cmp(&b.2)),
                GridObjective::MinRuntime => (a.2.total_cmp(&b.2), b.1.total_cmp(&a.1)),
            };
            first.then(second).then(a.0.cmp(&b.0))
        })
        .map(|s| s.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub supercell_dim: usize,
    pub n_vars: usize,
    pub mean_user_runtime_s: Option<f64>,
    pub user_runtime_sigma: Option<f64>,
    pub mean_ps: Option<f64>,
    /// Ps was measured and is zero.
    pub ps_zero: bool,
    pub failure: Option<Failure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingTable {
    pub rows: Vec<ScalingRow>,
    /// Least-squares slope of `ln runtime` against `ln N`.
    pub slope: Option<f64>,
}

impl ScalingTable {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("supercell_dim,n_vars,mean_user_runtime_s,user_runtime_sigma,mean_ps,ps_zero,failure\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.supercell_dim,
                r.n_vars,
                opt(r.mean_user_runtime_s),
                opt(r.user_runtime_sigma),
                opt(r.mean_ps),
                r.ps_zero,
                csv_field(r.failure.as_ref().map(|f| f.message.as_str()).unwrap_or(""))
            );
        }
        let _ = writeln!(out, "# log-log slope: {}", opt(self.slope));
        out
    }
}

/// Runs `repeats` serial experiments per supercell size. Sizes that fail
/// (for example by exceeding a solver guard) are flagged and skipped.
#[allow(clippy::too_many_arguments)]
pub fn scaling_run(
    method: Method,
    supercell_dims: &[usize],
    kappa: f64,
    lambda: f64,
    n_vacancies: usize,
    hyperparams: &Hyperparams,
    repeats: usize,
    base_seed: u64,
) -> Result<ScalingTable> {
    let mut dims = supercell_dims.to_vec();
    dims.sort_unstable();
    dims.dedup();
    let mut rows = Vec::new();
    for dim in dims {
        let spec = InstanceSpec::supercell(dim, kappa, lambda, n_vacancies);
        let mut row = ScalingRow {
            supercell_dim: dim,
            n_vars: spec.n_vars(),
            mean_user_runtime_s: None,
            user_runtime_sigma: None,
            mean_ps: None,
            ps_zero: false,
            failure: None,
        };
        let problem = match spec.build() {
            Ok(p) => p,
            Err(e) => {
                row.failure = Some(Failure::from(&e));
                rows.push(row);
                continue;
            }
        };
        let records = run_serial(method, &problem, hyperparams, repeats, base_seed)?;
        let ok: Vec<&ExperimentRecord> = records.iter().filter(|r| r.is_ok()).collect();
        if ok.is_empty() {
            row.failure = records.iter().find_map(|r| r.failure.clone());
        } else {
            let runtimes: Vec<f64> = ok.iter().map(|r| r.timing.user_runtime_s).collect();
            row.mean_user_runtime_s = metrics::mean(&runtimes).ok();
            row.user_runtime_sigma = metrics::std_deviation(&runtimes).ok();
            let ps: Vec<f64> = ok.iter().filter_map(|r| r.metrics.as_ref().map(|m| m.ps)).collect();
            row.mean_ps = metrics::mean(&ps).ok();
            row.ps_zero = row.mean_ps == Some(0.0);
        }
        rows.push(row);
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.mean_user_runtime_s.filter(|&t| t > 0.0).map(|t| ((r.n_vars as f64).ln(), t.ln())))
        .collect();
    Ok(ScalingTable { slope: log_log_slope(&pts), rows })
}

/// Least-squares slope; `None` with fewer than two distinct abscissae.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Plot-ready report text.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub summary_csv: String,
    pub distribution_data: String,
    pub convergence_data: String,
}

pub const SUMMARY_HEADER: &str = "group,method,n_vars,kappa,lambda,n_vacancies,hyperparams,n_experiments,n_failed,\
ps,ps_se,ps_sigma,ps_post,ps_post_se,ps_post_sigma,ar_post,ar_post_sigma,user_runtime_s,user_runtime_sigma,\
qpu_time_s,tts_s,tt_eps_s,chain_break_fraction";

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Groups records by (method, instance, hyperparameters) in first-seen
/// order.
fn group_records(records: &[ExperimentRecord]) -> Vec<Vec<&ExperimentRecord>> {
    let mut keys: Vec<(Method, &InstanceSpec, &Hyperparams)> = Vec::new();
    let mut groups: Vec<Vec<&ExperimentRecord>> = Vec::new();
    for r in records {
        let key = (r.method, &r.instance, &r.hyperparams);
        match keys.iter().position(|k| *k == key) {
            Some(i) => groups[i].push(r),
            None => {
                keys.push(key);
                groups.push(vec![r]);
            }
        }
    }
    groups
}

/// Summary table (one row per group), pooled energy histograms before and
/// after post-selection, and convergence traces truncated to the shortest
/// repeat.
pub fn emit_report(records: &[ExperimentRecord]) -> Report {
    let mut summary = format!("{SUMMARY_HEADER}\n");
    let mut dist = String::from("group,variant,energy,count,mass,renormalized\n");
    let mut conv = String::from("group,iteration,mean,sigma,n_repeats\n");
    for (g, group) in group_records(records).iter().enumerate() {
        let first = group[0];
        let ok: Vec<&ExperimentRecord> = group.iter().copied().filter(|r| r.is_ok()).collect();
        let owned: Vec<ExperimentRecord> = ok.iter().map(|r| (*r).clone()).collect();
        let report = aggregate(&owned).ok();
        let r = report.as_ref();
        let _ = writeln!(
            summary,
            "{g},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            first.method,
            first.instance.n_vars(),
            first.instance.kappa,
            first.instance.lambda,
            first.instance.n_vacancies,
            csv_field(&format_hyperparams(&first.hyperparams)),
            group.len(),
            group.len() - ok.len(),
            opt(r.map(|r| r.ps)),
            opt(r.map(|r| r.se)),
            opt(r.map(|r| r.sigma)),
            opt(r.and_then(|r| r.ps_post)),
            opt(r.and_then(|r| r.ps_post_se)),
            opt(r.and_then(|r| r.ps_post_sigma)),
            opt(r.and_then(|r| r.ar_post)),
            opt(r.and_then(|r| r.ar_post_sigma)),
            opt(r.map(|r| r.user_runtime_s)),
            opt(r.map(|r| r.user_runtime_sigma)),
            opt(r.and_then(|r| r.qpu_time_s)),
            opt(r.and_then(|r| r.tts_s)),
            opt(r.and_then(|r| r.tt_eps_s)),
            opt(r.and_then(|r| r.chain_break_fraction)),
        );

        let pre = pool_histograms(ok.iter().map(|r| r.histogram.as_slice()));
        let post = pool_histograms(ok.iter().map(|r| r.histogram_post.as_slice()));
        let total_pre: u64 = pre.iter().map(|h| h.1).sum();
        let total_post: u64 = post.iter().map(|h| h.1).sum();
        for (variant, hist, total) in [("pre", &pre, total_pre), ("post", &post, total_post)] {
            for &(e, c) in hist.iter() {
                let _ =
                    writeln!(dist, "{g},{variant},{e},{c},{},{}", c as f64 / total_pre as f64, c as f64 / total as f64);
            }
        }

        let traces: Vec<&[f64]> = ok.iter().map(|r| r.trace.as_slice()).filter(|t| !t.is_empty()).collect();
        if let Some(len) = traces.iter().map(|t| t.len()).min() {
            for i in 0..len {
                let column: Vec<f64> = traces.iter().map(|t| t[i]).collect();
                let _ = writeln!(
                    conv,
                    "{g},{i},{},{},{}",
                    metrics::mean(&column).unwrap_or(f64::NAN),
                    metrics::std_deviation(&column).unwrap_or(f64::NAN),
                    column.len()
                );
            }
        }
    }
    Report { summary_csv: summary, distribution_data: dist, convergence_data: conv }
}

/// Merges histograms, combining energies within the energy tolerance.
fn pool_histograms<'a>(hists: impl Iterator<Item = &'a [(f64, u64)]>) -> Vec<(f64, u64)> {
    let mut all: Vec<(f64, u64)> = hists.flatten().copied().collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, u64)> = Vec::new();
    for (e, c) in all {
        match out.last_mut() {
            Some(last) if (e - last.0).abs() <= crate::ENERGY_TOL => last.1 += c,
            _ => out.push((e, c)),
        }
    }
    out
}
