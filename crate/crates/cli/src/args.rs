use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "qubobench", version, about = "Benchmark QUBO solvers on graphene vacancy instances")]
pub struct Cli {
    /// TOML-style `key = value` file; keys mirror the long flags (dashes or
    /// underscores), `[subcommand]` tables scope keys to one subcommand.
    /// Flags given on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a supercell as an edge list.
    Lattice(LatticeArgs),
    /// Write the penalty QUBO of an instance as JSON.
    Qubo(QuboArgs),
    /// Run repeated experiments with one method and store JSONL records.
    Solve(SolveArgs),
    /// Embed an instance onto a Chimera or file topology.
    Embed(EmbedArgs),
    /// Grid search over hyperparameters or instance parameters.
    Sweep(SweepArgs),
    /// Runtime scaling over supercell sizes.
    Scale(ScaleArgs),
    /// Summary table, histograms and convergence data from JSONL records.
    Report(ReportArgs),
    /// Cross-check solvers against exhaustive oracles.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct LatticeArgs {
    #[arg(long, default_value_t = 3)]
    pub dim: usize,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

/// Instance selection. `--graph` and `--instance` replace the generated
/// supercell; `--instance` also fixes kappa, lambda and the vacancy count.
#[derive(Debug, Args, Clone)]
pub struct InstanceArgs {
    /// Supercell dimension (N = 2 dim^2).
    #[arg(long)]
    pub dim: Option<usize>,
    /// Edge-list graph file (`N <count>` header).
    #[arg(long, value_name = "FILE", conflicts_with_all = ["dim", "instance"])]
    pub graph: Option<PathBuf>,
    /// QUBO JSON written by `qubobench qubo`.
    #[arg(long, value_name = "FILE", conflicts_with = "dim")]
    pub instance: Option<PathBuf>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub vacancies: Option<usize>,
}

#[derive(Debug, Args)]
pub struct QuboArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Also print the constrained extrema to stderr.
    #[arg(long)]
    pub extrema: bool,
}

/// Method hyperparameters; only those the method accepts may be given.
#[derive(Debug, Args, Clone, Default)]
pub struct SolverArgs {
    #[arg(long)]
    pub reads: Option<String>,
    #[arg(long)]
    pub sweeps: Option<String>,
    #[arg(long)]
    pub beta_min: Option<String>,
    #[arg(long)]
    pub beta_max: Option<String>,
    /// SA sweep order: random or sequential.
    #[arg(long)]
    pub order: Option<String>,
    /// SA readout: final or best.
    #[arg(long)]
    pub readout: Option<String>,
    #[arg(long)]
    pub shots: Option<String>,
    /// realamp or qaoa.
    #[arg(long)]
    pub ansatz: Option<String>,
    /// Ansatz repetitions (QAOA layers).
    #[arg(long, alias = "p")]
    pub reps: Option<String>,
    /// CVaR fraction.
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub tol: Option<String>,
    #[arg(long)]
    pub max_iters: Option<String>,
    /// trust-region or nelder-mead.
    #[arg(long)]
    pub optimizer: Option<String>,
    /// sampled or analytic.
    #[arg(long)]
    pub objective: Option<String>,
    #[arg(long)]
    pub rho_begin: Option<String>,
    /// Relative tolerance for time-to-epsilon.
    #[arg(long)]
    pub epsilon: Option<String>,
    #[arg(long)]
    pub anneal_time: Option<String>,
    #[arg(long)]
    pub steps: Option<String>,
    /// chimera:m,t
    #[arg(long)]
    pub topology: Option<String>,
    /// clique or minor.
    #[arg(long)]
    pub embedding: Option<String>,
    #[arg(long)]
    pub chain_strength: Option<String>,
    #[arg(long)]
    pub tries: Option<String>,
}

impl SolverArgs {
    pub fn pairs(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("reads", &self.reads),
            ("sweeps", &self.sweeps),
            ("beta_min", &self.beta_min),
            ("beta_max", &self.beta_max),
            ("order", &self.order),
            ("readout", &self.readout),
            ("shots", &self.shots),
            ("ansatz", &self.ansatz),
            ("reps", &self.reps),
            ("alpha", &self.alpha),
            ("tol", &self.tol),
            ("max_iters", &self.max_iters),
            ("optimizer", &self.optimizer),
            ("objective", &self.objective),
            ("rho_begin", &self.rho_begin),
            ("epsilon", &self.epsilon),
            ("anneal_time", &self.anneal_time),
            ("steps", &self.steps),
            ("topology", &self.topology),
            ("embedding", &self.embedding),
            ("chain_strength", &self.chain_strength),
            ("tries", &self.tries),
        ]
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// brute, random, sa, vqe, anneal-sim or embedded-sa.
    #[arg(long)]
    pub method: String,
    /// Number of experiments.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSONL file to append records to (stdout when absent).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Zero every wall-clock field in the written records.
    #[arg(long)]
    pub mask_timing: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// `chimera:m,t` or a PHYS edge-list file; defaults to the smallest
    /// Chimera grid with t = 4 that holds a clique of the instance size.
    #[arg(long)]
    pub topo: Option<String>,
    /// clique or minor.
    #[arg(long, default_value = "clique")]
    pub mode: String,
    #[arg(long, default_value_t = 3.0)]
    pub chain_strength: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub tries: usize,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[arg(long)]
    pub method: String,
    /// `name=v1,v2,...`; repeat for more axes. `lambda`, `kappa` and
    /// `n_vacancies` vary the instance.
    #[arg(long, required = true)]
    pub axis: Vec<String>,
    /// Experiments per grid point.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    /// Grid ranking: max-mean-ps or min-runtime.
    #[arg(long, default_value = "max-mean-ps")]
    pub goal: String,
    /// Largest allowed number of grid points.
    #[arg(long, default_value_t = qubobench::harness::DEFAULT_GRID_BUDGET)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSONL file to append records to (stdout when absent).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// CSV of the full grid surface.
    #[arg(long, value_name = "FILE")]
    pub surface: Option<PathBuf>,
    #[arg(long)]
    pub mask_timing: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct ScaleArgs {
    #[arg(long)]
    pub method: String,
    /// Supercell dimensions, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub dims: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
    #[arg(long, default_value_t = 3.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 3)]
    pub vacancies: usize,
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV output (stdout when absent).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// JSONL record files.
    #[arg(long, required = true)]
    pub input: Vec<PathBuf>,
    /// Directory for summary.csv, distribution.csv and convergence.csv;
    /// the summary goes to stdout when absent.
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}
