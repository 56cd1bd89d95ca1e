use std::path::Path;
use std::process::{Command, Output};

fn qubobench(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qubobench"))
        .args(args)
        .current_dir(dir)
        .env_remove("QUBOBENCH_THREADS")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn lattice_and_qubo_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = qubobench(&["lattice", "--dim", "3", "--out", "g.txt"], dir.path());
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("g.txt")).unwrap();
    assert!(text.starts_with("N 18"));
    assert_eq!(text.lines().count(), 28);

    let out = qubobench(&["qubo", "--graph", "g.txt", "--extrema", "--out", "q.json"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("e_min=-20 e_max=-18 n_ground_states=54 n_feasible=816"));

    let out = qubobench(&["solve", "--instance", "q.json", "--method", "brute"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let line: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(line["metrics"]["ps"], 1.0);
    assert_eq!(line["metrics"]["min_energy"], -20.0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(qubobench(&["solve", "--method", "brute", "--dim", "5"], p).status.code(), Some(2));
    assert_eq!(qubobench(&["solve", "--method", "anneal-sim", "--dim", "3"], p).status.code(), Some(2));
    assert_eq!(qubobench(&["embed", "--topo", "chimera:2,4"], p).status.code(), Some(3));
    let minor =
        ["solve", "--method", "embedded-sa", "--topology", "chimera:1,4", "--embedding", "minor", "--tries", "1"];
    assert_eq!(qubobench(&minor, p).status.code(), Some(3));
    assert_eq!(qubobench(&["solve", "--method", "nope"], p).status.code(), Some(4));
    assert_eq!(qubobench(&["solve", "--method", "vqe", "--reads", "3"], p).status.code(), Some(4));
    assert_eq!(qubobench(&["solve", "--method", "sa", "--sweeps", "x"], p).status.code(), Some(4));
    assert_eq!(qubobench(&["solve", "--bogus"], p).status.code(), Some(4));
    assert_eq!(qubobench(&["solve", "--method", "sa", "--config", "missing.toml"], p).status.code(), Some(4));
    assert_eq!(qubobench(&["--help"], p).status.code(), Some(0));

    let bad = Command::new(env!("CARGO_BIN_EXE_qubobench"))
        .args(["lattice"])
        .env("QUBOBENCH_THREADS", "lots")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(4));
}

#[test]
fn embed_writes_uniform_clique_chains() {
    let dir = tempfile::tempdir().unwrap();
    let out = qubobench(&["embed", "--dim", "3", "--topo", "chimera:5,4", "--out", "e.json"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("chains=18 physical_qubits=108 max_chain_length=6"));
    let emb: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("e.json")).unwrap()).unwrap();
    assert_eq!(emb["chains"].as_object().unwrap().len(), 18);
}

#[test]
fn config_file_mirrors_flags() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(
        p.join("run.toml"),
        "seed = 3\nmask_timing = true\n[solve]\nmethod = \"random\"\nrepeats = 2\nshots = 100\n",
    )
    .unwrap();
    let via_config = qubobench(&["solve", "--config", "run.toml"], p);
    let via_flags = qubobench(
        &["solve", "--method", "random", "--repeats", "2", "--shots", "100", "--seed", "3", "--mask-timing"],
        p,
    );
    assert!(via_config.status.success(), "{}", stderr(&via_config));
    assert_eq!(stdout(&via_config), stdout(&via_flags));
    assert_eq!(stdout(&via_config).lines().count(), 2);

    let overridden = qubobench(&["solve", "--config", "run.toml", "--seed", "4"], p);
    assert_ne!(stdout(&overridden), stdout(&via_config));

    std::fs::write(p.join("bad.toml"), "sed = 3\n").unwrap();
    assert_eq!(qubobench(&["solve", "--config", "bad.toml", "--method", "sa"], p).status.code(), Some(4));
}

#[test]
fn solve_appends_and_report_summarises() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let sa = ["solve", "--method", "sa", "--repeats", "2", "--reads", "50", "--sweeps", "100", "--out", "r.jsonl"];
    let random = ["solve", "--method", "random", "--repeats", "2", "--out", "r.jsonl"];
    for args in [&sa[..], &random[..]] {
        let out = qubobench(args, p);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let out = qubobench(&random, p);
    assert!(out.status.success());
    assert!(stderr(&out).contains("experiments=2 failed=0"));
    assert_eq!(std::fs::read_to_string(p.join("r.jsonl")).unwrap().lines().count(), 6);

    let out = qubobench(&["report", "--input", "r.jsonl", "--out-dir", "rep"], p);
    assert!(out.status.success(), "{}", stderr(&out));
    let summary = std::fs::read_to_string(p.join("rep/summary.csv")).unwrap();
    // Two methods, and the random runs share one group.
    assert_eq!(summary.lines().count(), 3);
    assert!(p.join("rep/distribution.csv").exists() && p.join("rep/convergence.csv").exists());
}

#[test]
fn sweep_reports_best_point_and_surface() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let args = [
        "sweep",
        "--method",
        "sa",
        "--axis",
        "lambda=1,3",
        "--axis",
        "sweeps=100,200",
        "--reads",
        "100",
        "--repeats",
        "2",
        "--surface",
        "s.csv",
        "--mask-timing",
    ];
    let a = qubobench(&args, p);
    assert!(a.status.success(), "{}", stderr(&a));
    assert!(stderr(&a).contains("best lambda=3"));
    assert_eq!(stdout(&a).lines().count(), 8);
    let surface = std::fs::read_to_string(p.join("s.csv")).unwrap();
    assert!(surface.starts_with("lambda,sweeps,"));
    assert_eq!(surface.lines().count(), 5);
    assert_eq!(stdout(&qubobench(&args, p)), stdout(&a));

    let over = qubobench(&["sweep", "--method", "sa", "--axis", "sweeps=1,2,3", "--budget", "2"], p);
    assert_eq!(over.status.code(), Some(4));
}

#[test]
fn scale_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = qubobench(&["scale", "--method", "brute", "--dims", "2,3,5"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = stdout(&out);
    assert_eq!(
        csv.lines().next().unwrap(),
        "supercell_dim,n_vars,mean_user_runtime_s,user_runtime_sigma,mean_ps,ps_zero,failure"
    );
    assert!(stderr(&out).contains("N=50 flagged"));
}

#[test]
fn verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = qubobench(&["verify"], dir.path());
    assert!(out.status.success(), "{}", stdout(&out));
    assert!(stdout(&out).lines().all(|l| l.starts_with("PASS")));
}
