use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_noisy-traj"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn json_stdout(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn toy_model_simulation_matches_closed_form() {
    let out = run(&[
        "simulate", "--benchmark", "toy_model", "--q", "0.01", "--n", "50", "--sampler", "analog",
        "--angle-dist", "discrete", "--n-traj", "10000",
    ]);
    let v = json_stdout(&out);
    let mean = v["report"]["mean"][0].as_f64().unwrap();
    let sem = v["report"]["sem"][0].as_f64().unwrap();
    assert!((mean - 0.98f64.powi(50)).abs() <= 3.0 * sem, "{mean} +- {sem}");
    assert_eq!(v["report"]["trajectories_run"], 10000);
    assert_eq!(v["config"]["benchmark"]["kind"], "toy_model");
    assert_eq!(v["config"]["master_seed"], 0);
}

#[test]
fn exact_backend_gives_closed_form() {
    let v = json_stdout(&run(&["simulate", "--benchmark", "toy_model", "--q", "0.01", "--n", "50", "--exact"]));
    let value = v["exact"]["values"][0][0].as_f64().unwrap();
    assert!((value - 0.98f64.powi(50)).abs() < 1e-12);
}

#[test]
fn depolarizing_factorization() {
    let v = json_stdout(&run(&["factorize", "--channel", "depol", "--qubits", "2", "--epsilon", "0.001"]));
    let factors = v["factors"].as_object().unwrap();
    assert_eq!(factors.len(), 15);
    let want = 0.5 - 0.5 * 0.999f64.powf(1.0 / 8.0);
    for q in factors.values() {
        assert!((q.as_f64().unwrap() - want).abs() < 1e-15);
    }
    assert!(v["residual"].as_f64().unwrap() < 1e-12);
    assert_eq!(v["all_physical"], true);
}

#[test]
fn compare_writes_variance_ratio_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("cmp");
    let out = run(&[
        "compare", "--benchmark", "ising2d", "--lx", "2", "--ly", "2", "--steps", "3", "--epsilon", "0.01",
        "--n-traj", "50", "--out-dir", out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("variance_ratio.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "record_point,observable_name,digital_variance,analog_variance,ratio");
    assert_eq!(lines.len(), 1 + 4);
    // step 0 is noiseless: 0/0 reads as 1
    assert!(lines[1].ends_with(",1e0"), "{}", lines[1]);
    let v = read_json(&out_dir.join("compare.json"));
    assert_eq!(v["config"]["n_trajectories"], 50);
    assert_eq!(v["digital"]["trajectories_run"], 50);
}

#[test]
fn outputs_are_reproducible_and_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    let args = |d: &Path| {
        vec![
            "simulate".to_string(), "--benchmark".into(), "xy_chain".into(), "--n".into(), "4".into(),
            "--steps".into(), "3".into(), "--epsilon".into(), "0.02".into(), "--n-traj".into(), "40".into(),
            "--seed".into(), "17".into(), "--out-dir".into(), d.to_str().unwrap().into(),
        ]
    };
    assert!(bin().args(args(&a)).env("RAYON_NUM_THREADS", "1").status().unwrap().success());
    assert!(bin().args(args(&b)).env("RAYON_NUM_THREADS", "3").status().unwrap().success());
    for f in ["summary.json", "raw.csv", "summary.csv"] {
        let x = std::fs::read(a.join(f)).unwrap();
        let y = std::fs::read(b.join(f)).unwrap();
        if f == "summary.json" {
            let mut vx: Value = serde_json::from_slice(&x).unwrap();
            let mut vy: Value = serde_json::from_slice(&y).unwrap();
            vx["config"]["output_dir"] = Value::Null;
            vy["config"]["output_dir"] = Value::Null;
            assert_eq!(vx, vy);
        } else {
            assert_eq!(x, y, "{f}");
        }
    }
    // rerun from the embedded config
    let v = read_json(&a.join("summary.json"));
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, serde_json::to_string(&v["config"]).unwrap()).unwrap();
    let out = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out-dir", c.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read(a.join("raw.csv")).unwrap(), std::fs::read(c.join("raw.csv")).unwrap());
}

#[test]
fn config_errors_exit_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("never");
    let o = out_dir.to_str().unwrap();
    let bad_cfg = dir.path().join("bad.json");
    std::fs::write(&bad_cfg, "{\"benchmark\": {\"kind\": \"toy_model\", \"q\": 0.01}").unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["simulate", "--benchmark", "nope", "--n-traj", "10", "--out-dir", o],
        vec!["simulate", "--benchmark", "toy_model", "--lx", "3", "--n-traj", "10", "--out-dir", o],
        vec!["simulate", "--benchmark", "toy_model", "--n-traj", "10", "--target-sem", "0.1", "--out-dir", o],
        vec!["simulate", "--benchmark", "toy_model", "--out-dir", o],
        vec!["simulate", "--benchmark", "toy_model", "--q", "0.7", "--n-traj", "10", "--out-dir", o],
        vec!["simulate", "--benchmark", "toy_model", "--sampler", "quantum", "--n-traj", "10", "--out-dir", o],
        vec!["simulate", "--config", bad_cfg.to_str().unwrap(), "--n-traj", "10", "--out-dir", o],
        vec!["compare", "--benchmark", "toy_model", "--sampler", "digital", "--n-traj", "10", "--out-dir", o],
        vec!["factorize", "--channel", "pauli", "--probabilities", "{\"I\": 0.5, \"X\": 0.1}"],
        vec!["simulate", "--bogus-flag"],
    ];
    for args in cases {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out_dir.exists(), "{args:?} left output behind");
    }
    let out = run(&["simulate", "--config", bad_cfg.to_str().unwrap(), "--n-traj", "10"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}

#[test]
fn capacity_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("out");
    let out = run(&[
        "simulate", "--benchmark", "ising2d", "--lx", "4", "--ly", "4", "--steps", "1", "--exact",
        "--out-dir", o.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&["simulate", "--benchmark", "ising2d", "--lx", "6", "--ly", "5", "--steps", "1", "--n-traj", "2"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!o.exists());
}

#[test]
fn non_physical_factorization_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let circuit = dir.path().join("circuit.json");
    std::fs::write(
        &circuit,
        r#"{"num_qubits": 1, "initial": "0", "ops": [
            {"gate": "rx", "qubits": [0], "angle": 0.3,
             "noise": {"type": "pauli", "support": [0], "probabilities": {"I": 0.6, "X": 0.2, "Y": 0.2}}}
        ], "quantities": [{"kind": "observable", "name": "z", "observable": {"pauli_sum": [[1.0, "Z"]]}}]}"#,
    )
    .unwrap();
    let c = circuit.to_str().unwrap();
    let out = run(&["simulate", "--circuit", c, "--sampler", "analog", "--n-traj", "10"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("random-rotation"));
    let v = json_stdout(&run(&["simulate", "--circuit", c, "--sampler", "analog_random_rotation", "--n-traj", "10"]));
    assert_eq!(v["report"]["trajectories_run"], 10);
    assert!(v["circuit"]["definition"].is_object());
    let v = json_stdout(&run(&["factorize", "--channel", "pauli", "--probabilities", r#"{"I": 0.6, "X": 0.2, "Y": 0.2}"#]));
    assert_eq!(v["all_physical"], false);
    assert_eq!(v["worst_unphysical"]["string"], "Z");
}

#[test]
fn build_emits_circuit_json() {
    let v = json_stdout(&run(&["build", "--benchmark", "tilted_ising", "--n", "6", "--steps", "2"]));
    assert_eq!(v["num_qubits"], 6);
    assert_eq!(v["ops"].as_array().unwrap().len(), 2 * (5 + 6 + 6));
    let v = json_stdout(&run(&["build", "--benchmark", "maxcut", "--n", "8", "--t", "3", "--noiseless"]));
    assert!(v["ops"].as_array().unwrap().iter().all(|op| op["noise"].is_null()));
}

#[test]
fn sample_dist_reports_moments_and_draws() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("dist");
    let out = run(&[
        "sample-dist", "--angle-dist", "exponential", "--q", "0.01", "--samples", "500",
        "--out-dir", o.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let v = read_json(&o.join("moments.json"));
    assert!((v["moments"]["sin2"].as_f64().unwrap() - 0.01).abs() < 1e-9);
    let checks = v["closed_form_checks"].as_array().unwrap();
    assert!(checks.iter().any(|c| c["kind"] == "exponential" && c["passed"] == false));
    let draws = std::fs::read_to_string(o.join("draws.csv")).unwrap();
    assert_eq!(draws.lines().count(), 501);
}

#[test]
fn top_k_of_small_maxcut() {
    let v = json_stdout(&run(&[
        "simulate", "--benchmark", "maxcut", "--n", "6", "--t", "10", "--epsilon", "0.001", "--exact", "--top-k", "3",
    ]));
    let rows = v["top_k"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    let p: Vec<f64> = rows.iter().map(|r| r["probability"].as_f64().unwrap()).collect();
    assert!(p[0] >= p[1] && p[1] >= p[2]);
    assert_eq!(rows[0]["bitstring"].as_str().unwrap().len(), 6);
}
