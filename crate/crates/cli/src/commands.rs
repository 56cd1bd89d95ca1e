use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use qubobench::embedding::{clique_embedding, interaction_graph, minor_embedding, validate_embedding, TargetTopology};
use qubobench::harness::{
    self, emit_report, grid_search, parse_chimera, read_jsonl, scaling_run, to_jsonl, ExperimentRecord, FailureKind,
    GridObjective, GridSpec, Hyperparams, InstanceSpec, JsonlStore, Method, ParamValue,
};
use qubobench::qubo::{constrained_extrema, QuboInstance};
use qubobench::{Error, LatticeGraph, Result};

use crate::args::*;

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

impl InstanceArgs {
    pub fn spec(&self) -> Result<InstanceSpec> {
        let kappa = self.kappa.unwrap_or(1.0);
        let lambda = self.lambda.unwrap_or(3.0);
        let vacancies = self.vacancies.unwrap_or(3);
        if let Some(path) = &self.instance {
            if self.kappa.is_some() || self.lambda.is_some() || self.vacancies.is_some() {
                return Err(Error::Config("--instance fixes kappa, lambda and vacancies".into()));
            }
            return InstanceSpec::from_qubo(&QuboInstance::from_json(&read(path)?)?);
        }
        if let Some(path) = &self.graph {
            let graph = LatticeGraph::parse(&read(path)?)?;
            return Ok(InstanceSpec::from_graph(&graph, kappa, lambda, vacancies));
        }
        Ok(InstanceSpec::supercell(self.dim.unwrap_or(3), kappa, lambda, vacancies))
    }
}

impl SolverArgs {
    pub fn hyperparams(&self) -> Hyperparams {
        self.pairs()
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), ParamValue::parse(v))))
            .collect()
    }
}

pub fn lattice(args: &LatticeArgs) -> Result<()> {
    let g = LatticeGraph::supercell(args.dim)?;
    write_out(args.out.as_deref(), &g.to_edge_list())
}

pub fn qubo(args: &QuboArgs) -> Result<()> {
    let problem = args.instance.spec()?.build()?;
    if args.extrema {
        let x = constrained_extrema(&problem.qubo)?;
        eprintln!(
            "e_min={} e_max={} n_ground_states={} n_feasible={}",
            x.e_min, x.e_max, x.n_ground_states, x.n_feasible
        );
    }
    let mut json = problem.qubo.to_json();
    json.push('\n');
    write_out(args.out.as_deref(), &json)
}

fn method(name: &str) -> Result<Method> {
    name.parse()
}

/// Error for the first failed record, if any.
fn failure_error(records: &[ExperimentRecord]) -> Option<Error> {
    records.iter().find_map(|r| Some((r, r.failure.as_ref()?))).map(|(r, f)| match f.kind {
        FailureKind::Guard => Error::Guard(f.message.trim_start_matches("guard exceeded: ").to_string()),
        FailureKind::NoEmbedding => {
            Error::NoEmbedding(r.hyperparams.get("tries").and_then(ParamValue::as_u64).unwrap_or(0) as usize)
        }
        FailureKind::Solver => Error::InvalidArgument(f.message.clone()),
    })
}

fn summarize(records: &[ExperimentRecord]) {
    let failed = records.iter().filter(|r| !r.is_ok()).count();
    match harness::aggregate(records) {
        Ok(r) => eprintln!(
            "experiments={} failed={failed} ps={:.6} se={:.6} sigma={:.6} ps_post={} ar_post={} user_runtime_s={:.6}",
            r.n_experiments,
            r.ps,
            r.se,
            r.sigma,
            r.ps_post.map(|p| format!("{p:.6}")).unwrap_or_else(|| "-".into()),
            r.ar_post.map(|p| format!("{p:.6}")).unwrap_or_else(|| "-".into()),
            r.user_runtime_s
        ),
        Err(_) => eprintln!("experiments={} failed={failed}", records.len()),
    }
    for r in records.iter().filter(|r| !r.is_ok()) {
        eprintln!("experiment {} failed: {}", r.experiment, r.failure.as_ref().unwrap().message);
    }
}

fn emit_records(out: Option<&Path>, records: &[ExperimentRecord], mask: bool) -> Result<()> {
    match out {
        Some(path) => {
            let mut store = JsonlStore::open(path, mask)?;
            for r in records {
                store.append(r)?;
            }
            Ok(())
        }
        None => write_out(None, &to_jsonl(records, mask)),
    }
}

pub fn solve(args: &SolveArgs) -> Result<()> {
    let m = method(&args.method)?;
    let problem = args.instance.spec()?.build()?;
    let hp = args.solver.hyperparams();
    let mut records = Vec::new();
    match &args.out {
        Some(path) => {
            let mut store = JsonlStore::open(path, args.mask_timing)?;
            harness::run_experiments_with_sink(m, &problem, &hp, args.repeats, args.seed, |r| {
                records.push(r.clone());
                store.append(r)
            })?;
        }
        None => {
            records = harness::run_experiments(m, &problem, &hp, args.repeats, args.seed)?;
            emit_records(None, &records, args.mask_timing)?;
        }
    }
    summarize(&records);
    failure_error(&records).map_or(Ok(()), Err)
}

pub fn embed(args: &EmbedArgs) -> Result<()> {
    let problem = args.instance.spec()?.build()?;
    let ising = problem.qubo.to_ising();
    let n = ising.n_spins();
    let topo = match &args.topo {
        None => TargetTopology::chimera(n.div_ceil(4).max(1), 4)?,
        Some(spec) if spec.starts_with("chimera:") => {
            let (m, t) = parse_chimera(spec)?;
            TargetTopology::chimera(m, t)?
        }
        Some(path) => TargetTopology::parse(&read(Path::new(path))?)?,
    };
    if !(args.chain_strength > 0.0) {
        return Err(Error::Config("--chain-strength must be positive".into()));
    }
    let logical = interaction_graph(&ising);
    let emb = match args.mode.as_str() {
        "clique" => clique_embedding(n, &topo)?,
        "minor" => minor_embedding(&logical, &topo, args.seed, args.tries)?,
        other => return Err(Error::Config(format!("--mode must be clique or minor, got '{other}'"))),
    }
    .with_chain_strength(args.chain_strength);
    validate_embedding(&emb, &logical, &topo)?;
    let lengths = emb.chain_lengths();
    eprintln!(
        "chains={} physical_qubits={} max_chain_length={} mean_chain_length={:.3}",
        lengths.len(),
        emb.n_physical_used(),
        lengths.iter().max().copied().unwrap_or(0),
        lengths.iter().sum::<usize>() as f64 / lengths.len().max(1) as f64
    );
    let mut json = emb.to_json();
    json.push('\n');
    write_out(args.out.as_deref(), &json)
}

fn parse_axis(text: &str) -> Result<(String, Vec<ParamValue>)> {
    let (name, values) =
        text.split_once('=').ok_or_else(|| Error::Config(format!("axis '{text}' is not of the form name=v1,v2")))?;
    let values: Vec<ParamValue> = values.split(',').filter(|v| !v.trim().is_empty()).map(ParamValue::parse).collect();
    if values.is_empty() {
        return Err(Error::Config(format!("axis '{name}' has no values")));
    }
    Ok((name.trim().replace('-', "_"), values))
}

pub fn sweep(args: &SweepArgs) -> Result<()> {
    let m = method(&args.method)?;
    let spec = args.instance.spec()?;
    let mut axes = BTreeMap::new();
    for a in &args.axis {
        let (name, values) = parse_axis(a)?;
        if axes.insert(name.clone(), values).is_some() {
            return Err(Error::Config(format!("axis '{name}' given twice")));
        }
    }
    let objective = match args.goal.as_str() {
        "max-mean-ps" => GridObjective::MaxMeanPs,
        "min-runtime" => GridObjective::MinRuntime,
        other => return Err(Error::Config(format!("unknown goal '{other}'"))),
    };
    let grid = GridSpec { axes, objective, repeats_per_point: args.repeats, budget: args.budget };
    let result = grid_search(m, &spec, &args.solver.hyperparams(), &grid, args.seed)?;
    emit_records(args.out.as_deref(), &result.records, args.mask_timing)?;
    if let Some(path) = &args.surface {
        fs::write(path, result.surface_csv())?;
    }
    match result.best_point() {
        Some(best) => eprintln!(
            "best {} ps_feasible={}",
            harness::format_hyperparams(&best.params),
            best.ps_feasible.map(|p| format!("{p:.6}")).unwrap_or_else(|| "-".into())
        ),
        None => eprintln!("no grid point produced metrics"),
    }
    Ok(())
}

pub fn scale(args: &ScaleArgs) -> Result<()> {
    let m = method(&args.method)?;
    let table = scaling_run(
        m,
        &args.dims,
        args.kappa,
        args.lambda,
        args.vacancies,
        &args.solver.hyperparams(),
        args.repeats,
        args.seed,
    )?;
    write_out(args.out.as_deref(), &table.to_csv())?;
    for row in table.rows.iter().filter(|r| r.failure.is_some()) {
        eprintln!("N={} flagged: {}", row.n_vars, row.failure.as_ref().unwrap().message);
    }
    Ok(())
}

pub fn report(args: &ReportArgs) -> Result<()> {
    let mut records = Vec::new();
    for path in &args.input {
        records.extend(read_jsonl(&read(path)?)?);
    }
    let report = emit_report(&records);
    match &args.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join("summary.csv"), &report.summary_csv)?;
            fs::write(dir.join("distribution.csv"), &report.distribution_data)?;
            fs::write(dir.join("convergence.csv"), &report.convergence_data)?;
            Ok(())
        }
        None => write_out(None, &report.summary_csv),
    }
}
