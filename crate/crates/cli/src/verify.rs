//! Self-checks against exhaustive enumeration and closed-form states.

use qubobench::anneal::{anneal_evolve, AnnealConfig};
use qubobench::classical::{brute_force, simulated_annealing, SaSchedule};
use qubobench::embedding::{clique_embedding, interaction_graph, validate_embedding, TargetTopology};
use qubobench::qubo::constrained_extrema;
use qubobench::vqe::{prepare_state, AnsatzSpec};
use qubobench::{IsingInstance, LatticeGraph, QuboInstance, Result, ENERGY_TOL};

struct Check {
    name: &'static str,
    outcome: Result<std::result::Result<(), String>>,
}

fn ensure(ok: bool, detail: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(detail())
    }
}

fn reference_instance() -> Result<QuboInstance> {
    QuboInstance::penalty(&LatticeGraph::supercell(3)?, 1.0, 3.0, 3)
}

fn lattice() -> Result<std::result::Result<(), String>> {
    let g = LatticeGraph::supercell(3)?;
    Ok(ensure(
        g.n_sites() == 18 && g.n_edges() == 27 && g.degrees().iter().all(|&d| d == 3) && g.bipartition().is_some(),
        || format!("{} sites, {} edges", g.n_sites(), g.n_edges()),
    ))
}

fn ising_roundtrip() -> Result<std::result::Result<(), String>> {
    let q = reference_instance()?;
    let qe = q.all_energies()?;
    let ie = q.to_ising().all_energies()?;
    let worst = qe.iter().zip(&ie).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(ensure(worst <= 1e-9, || format!("max deviation {worst:e}")))
}

fn extrema() -> Result<std::result::Result<(), String>> {
    let q = reference_instance()?;
    let x = constrained_extrema(&q)?;
    let bf = brute_force(&q)?;
    Ok(ensure(
        (x.e_min + 20.0).abs() < ENERGY_TOL
            && (x.e_max + 18.0).abs() < ENERGY_TOL
            && x.n_ground_states == 54
            && x.n_feasible == 816
            && (bf.energy - x.e_min).abs() < ENERGY_TOL
            && bf.bits.count_zeros() == 3,
        || {
            format!(
                "e_min={} e_max={} ground={} feasible={} brute={}",
                x.e_min, x.e_max, x.n_ground_states, x.n_feasible, bf.energy
            )
        },
    ))
}

fn annealing(seed: u64) -> Result<std::result::Result<(), String>> {
    let q = reference_instance()?;
    let samples = simulated_annealing(&q, &SaSchedule::geometric(0.1, 10.0, 1000)?, 100, seed)?;
    let best = samples.min_energy().unwrap_or(f64::INFINITY);
    Ok(ensure((best + 20.0).abs() < ENERGY_TOL, || format!("best energy {best}")))
}

fn statevector() -> Result<std::result::Result<(), String>> {
    let ising = IsingInstance::new(vec![0.0; 2], &[], 0.0)?;
    let state = prepare_state(&AnsatzSpec::real_amplitudes(2, 1), &[std::f64::consts::PI, 0.0, 0.0, 0.0], &ising)?;
    let p = state.probabilities();
    Ok(ensure((p[3] - 1.0).abs() < 1e-12, || format!("P(11) = {}", p[3])))
}

fn anneal_norm(seed: u64) -> Result<std::result::Result<(), String>> {
    let q = QuboInstance::penalty(&LatticeGraph::supercell(2)?, 1.0, 1.0, 3)?;
    let state = anneal_evolve(&q.to_ising(), &AnnealConfig::new(5.0, 1, seed))?;
    let drift = (state.norm_sqr() - 1.0).abs();
    Ok(ensure(drift < 1e-9, || format!("norm drift {drift:e}")))
}

fn clique() -> Result<std::result::Result<(), String>> {
    let q = reference_instance()?;
    let topo = TargetTopology::chimera(5, 4)?;
    let emb = clique_embedding(18, &topo)?;
    validate_embedding(&emb, &interaction_graph(&q.to_ising()), &topo)?;
    let lengths = emb.chain_lengths();
    Ok(ensure(lengths.iter().all(|&l| l == 6), || format!("chain lengths {lengths:?}")))
}

/// Runs every check, printing one line each. Returns whether all passed.
pub fn run(seed: u64) -> bool {
    let checks = [
        Check { name: "lattice-3x3", outcome: lattice() },
        Check { name: "qubo-ising-roundtrip", outcome: ising_roundtrip() },
        Check { name: "constrained-extrema", outcome: extrema() },
        Check { name: "sa-ground-state", outcome: annealing(seed) },
        Check { name: "realamp-basis-state", outcome: statevector() },
        Check { name: "anneal-unitarity", outcome: anneal_norm(seed) },
        Check { name: "chimera-clique", outcome: clique() },
    ];
    let mut all = true;
    for c in checks {
        match c.outcome {
            Ok(Ok(())) => println!("PASS {}", c.name),
            Ok(Err(detail)) => {
                all = false;
                println!("FAIL {}: {detail}", c.name);
            }
            Err(e) => {
                all = false;
                println!("FAIL {}: {e}", c.name);
            }
        }
    }
    all
}
