use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_metastab"))
        .current_dir(dir)
        .env_remove("METASTAB_OUT")
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, body: &str) {
    std::fs::write(dir.join(name), body).unwrap();
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let idx = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

const FIG2: &str = r#"{
  "schema": 1,
  "model": "sa",
  "beta": 4.0,
  "integrator": {"scheme": "euler-project", "dt": 0.1, "t_max": 30.0},
  "init": {"kind": "uniform", "dim": 2, "n": 5},
  "seeds": [3]
}"#;

#[test]
fn simulate_energy_nondecreasing() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.json", FIG2);
    let o = run(dir.path(), &["simulate", "--config", "c.json", "--out", "o"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("o/trace_seed3.csv")).unwrap();
    let e = column(&csv, "energy_normalized");
    assert_eq!(e.len(), 301);
    assert!(e.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    assert!(dir.path().join("o/manifest.json").exists());
}

#[test]
fn zero_horizon_gives_one_record() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.json", &FIG2.replace("\"t_max\": 30.0", "\"t_max\": 0.0"));
    let o = run(dir.path(), &["simulate", "--config", "c.json", "--out", "o"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("o/trace_seed3.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn identical_configs_give_identical_traces() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.json", FIG2);
    for out in ["a", "b"] {
        assert_eq!(run(dir.path(), &["simulate", "--config", "c.json", "--out", out]).status.code(), Some(0));
    }
    let a = std::fs::read(dir.path().join("a/trace_seed3.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/trace_seed3.csv")).unwrap();
    assert_eq!(a, b);
    let hash = |p: &str| {
        let m: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join(p)).unwrap()).unwrap();
        m["config_hash"].as_str().unwrap().to_string()
    };
    assert_eq!(hash("a/manifest.json"), hash("b/manifest.json"));
}

#[test]
fn unknown_fields_and_bad_schema_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "extra.json", &FIG2.replace("\"seeds\"", "\"colour\": 1, \"seeds\""));
    write(dir.path(), "old.json", &FIG2.replace("\"schema\": 1", "\"schema\": 0"));
    for f in ["extra.json", "old.json"] {
        let o = run(dir.path(), &["simulate", "--config", f, "--out", "o"]);
        assert_eq!(o.status.code(), Some(2));
        assert!(!dir.path().join("o").exists());
    }
}

#[test]
fn refused_certificate_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "c.json",
        r#"{"schema": 1, "model": "usa", "beta": 3.0,
            "init": {"kind": "separated", "dim": 2, "n": 6, "k": 2, "eps": 0.02}, "seeds": [0, 1]}"#,
    );
    let o = run(dir.path(), &["metastability", "--config", "c.json", "--out", "o"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gamma"));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn metastability_batch_prints_pass_lines() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "c.json",
        r#"{"schema": 1, "model": "usa", "beta": 12.0,
            "init": {"kind": "separated", "dim": 2, "n": 4, "k": 2, "eps": 0.02}, "seeds": [0, 1, 2]}"#,
    );
    let o = run(dir.path(), &["metastability", "--config", "c.json", "--out", "o", "--workers", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().filter(|l| l.contains(": PASS")).count(), 3);
    assert!(stdout.contains("escape not observed"));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("o/report_seed1.json")).unwrap()).unwrap();
    assert!(report["certificate"]["gamma"].as_f64().unwrap() > 0.0);
}

#[test]
fn two_particle_staircase_single_jump() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["staircase", "--n", "2", "--c0", "0.2", "--beta-list", "100", "--out", "p.csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("p.summary.json")).unwrap()).unwrap();
    assert_eq!(summary["merges"][0], 1);
    let csv = std::fs::read_to_string(dir.path().join("p.csv")).unwrap();
    assert_eq!(*column(&csv, "energy_normalized").last().unwrap(), 1.0);
    assert!(dir.path().join("p.events.json").exists());
}

#[test]
fn strict_staircase_refuses_ladder() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["staircase", "--strict", "--out", "p.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("t_2"));
    assert!(!dir.path().join("p.csv").exists());
}

#[test]
fn sample_init_round_trips_through_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["sample-init", "--kind", "separated", "--seed", "4", "--out", "x.json"]);
    assert_eq!(o.status.code(), Some(0));
    write(
        dir.path(),
        "c.json",
        r#"{"schema": 1, "beta": 12.0, "init": {"kind": "file", "path": "x.json"},
            "integrator": {"scheme": "rk4-project", "dt": 0.01, "t_max": 1.0},
            "caps": {"eps": 0.02}}"#,
    );
    let o = run(dir.path(), &["simulate", "--config", "c.json", "--out", "o"]);
    assert_eq!(o.status.code(), Some(0));
    let o = run(dir.path(), &["sample-init", "--kind", "spiral", "--out", "y.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_gradients_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["verify", "--suite", "gradients", "--out", "v"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("[PASS]"));
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.json", FIG2);
    let o = Command::new(env!("CARGO_BIN_EXE_metastab"))
        .current_dir(dir.path())
        .env("METASTAB_OUT", "envout")
        .args(["simulate", "--config", "c.json"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("envout/trace_seed3.csv").exists());
}
