use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_betahankel"));
    c.env("RAYON_NUM_THREADS", "1");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn params_prints_derived_exponents() {
    let o = run(&["params", "--n", "3", "--beta", "1", "--k", "0"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!(s.contains("gamma"), "{s}");
    assert!(s.contains("mu"), "{s}");
}

#[test]
fn params_rejects_beta_out_of_range() {
    assert_eq!(code(&run(&["params", "--beta", "2.5"])), 1);
    assert_eq!(code(&run(&["params", "--n", "1"])), 1);
}

#[test]
fn params_writes_triplet_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["params", "--n", "3", "--beta", "0", "--triplets", "q=2,p=2..6", "--out", out]);
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(dir.path().join("triplets.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "m,p,q,kind");
    assert_eq!(lines.len(), 6);
    // heat case: admissible while p < 3q
    assert!(lines[1].ends_with("admissible"));
    assert!(!lines[5].ends_with(",admissible"), "{}", lines[5]);
    assert!(dir.path().join("params.json").exists());
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&run(&["no-such-command"])), 1);
    assert_eq!(code(&run(&["verify"])), 1);
    assert_eq!(code(&run(&["verify", "--suite", "bogus"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn bad_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(dir.path(), "a.json", r#"{"model": {"n": 3, "colour": 1}}"#);
    assert_eq!(code(&run(&["params", "--config", &unknown])), 1);
    let broken = write(dir.path(), "b.json", "{ not json");
    assert_eq!(code(&run(&["params", "--config", &broken])), 1);
    let missing = dir.path().join("missing.json");
    assert_eq!(code(&run(&["params", "--config", missing.to_str().unwrap()])), 1);
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"model": {"n": 4, "beta": 0.5, "k": 1}}"#);
    let out = dir.path().join("o");
    let o = run(&["params", "--config", &cfg, "--n", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("params.json")).unwrap()).unwrap();
    assert_eq!(v["n"], 2);
    assert_eq!(v["k"], 1);
    assert_eq!(v["beta"], 0.5);
}

#[test]
fn verify_watson_reports_rows_with_anchors() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify", "--suite", "watson", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let rows: Vec<serde_json::Value> =
        serde_json::from_slice(&std::fs::read(dir.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(rows.len(), 18);
    for r in &rows {
        assert_eq!(r["suite"], "watson");
        assert!(!r["anchor"].as_str().unwrap().is_empty());
        assert_eq!(r["pass"], true);
    }
}

#[test]
fn zero_data_stays_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "evolve", "--n", "3", "--beta", "1", "--data", "zero", "--t-end", "1", "--steps", "4", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("evolve.json")).unwrap()).unwrap();
    assert_eq!(report["completed"], true);
    let state = std::fs::read_to_string(dir.path().join("final_state.csv")).unwrap();
    for line in state.lines().skip(1) {
        let v: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(v, 0.0);
    }
    for name in ["trajectory.csv", "windows.csv"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
}

#[test]
fn small_gaussian_data_completes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "evolve", "--n", "3", "--beta", "1", "--b", "1", "--sign", "defocusing", "--q", "2", "--data", "gaussian",
        "--amplitude", "0.1", "--scale", "1", "--t-end", "2", "--steps", "4", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("evolve.json")).unwrap()).unwrap();
    assert_eq!(report["completed"], true);
    assert_eq!(report["detected"], false);
    assert!((report["final_time"].as_f64().unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn blowup_exit_code_is_opt_in() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "blow.json",
        r#"{"model": {"n": 3, "beta": 1, "k": 0},
            "grid": {"r_max": 16, "rho_max": 4000},
            "data": {"kind": "bump", "amplitude": 5, "width": 2, "power": 8},
            "evolution": {"t_end": 2, "steps": 40, "b": 1, "sign": "focusing", "q": 8, "blowup_threshold": 1e5}}"#,
    );
    let out = dir.path().join("o");
    let o = run(&["evolve", "--config", &cfg, "--fail-on-blowup", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("evolve.json")).unwrap()).unwrap();
    assert_eq!(report["detected"], true);
    let t_star = report["t_star_fit"].as_f64().unwrap();
    assert!(t_star > 0.0 && t_star < 2.0);
    // without the flag the same run is a success
    assert_eq!(code(&run(&["evolve", "--config", &cfg])), 0);
}

#[test]
fn decay_fit_recovers_kernel_rate() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["decay-fit", "--n", "3", "--beta", "1", "--p", "2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows: Vec<serde_json::Value> =
        serde_json::from_slice(&std::fs::read(dir.path().join("decay.json")).unwrap()).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(rows[0]["abs_error"].as_f64().unwrap() <= 1e-2);
}

#[test]
fn young_audit_holds() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "young-audit", "--n", "3", "--beta", "1", "--pairs", "4", "--triple", "2,4/3,4/3", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("young.json")).unwrap()).unwrap();
    assert_eq!(summary["all_hold"], true);
    assert_eq!(summary["pairs"], 4);
    let bad = run(&["young-audit", "--triple", "3,1.5,2"]);
    assert_eq!(code(&bad), 1);
}
