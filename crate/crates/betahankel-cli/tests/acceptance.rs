//! Acceptance gate: one line per criterion, non-zero exit if any fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use betahankel::verify::{run_suite, Relation, Suite, VerifyOptions};

type Criterion = (&'static str, Box<dyn Fn() -> Outcome>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn suite_outcome(suite: Suite) -> Outcome {
    let report = match run_suite(suite, &VerifyOptions::default()) {
        Ok(r) => r,
        Err(e) => return Outcome { pass: false, detail: format!("error: {e}") },
    };
    let total = report.checks.len();
    let passed = report.checks.iter().filter(|c| c.pass).count();
    let mut detail = format!("{passed}/{total} checks");
    // tightest upper-bound check, as measured/tolerance
    let worst = report
        .checks
        .iter()
        .filter(|c| c.relation == Relation::AtMost && c.tolerance > 0.0)
        .map(|c| (c.measured / c.tolerance, c.name.as_str()))
        .fold(None, |acc: Option<(f64, &str)>, x| match acc {
            Some(a) if a.0 >= x.0 => Some(a),
            _ => Some(x),
        });
    if let Some((ratio, name)) = worst {
        detail.push_str(&format!(", worst {ratio:.3} of tolerance ({name})"));
    }
    for c in report.failures() {
        detail.push_str(&format!("; FAIL {} measured {:e} vs {:e}", c.name, c.measured, c.tolerance));
    }
    Outcome { pass: report.passed && total > 0, detail }
}

fn read_dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir).expect("output directory") {
        let entry = entry.unwrap();
        files.insert(entry.file_name().to_string_lossy().into_owned(), std::fs::read(entry.path()).unwrap());
    }
    files
}

fn run_cli(config: &Path, sub: &str, out: &Path, threads: Option<usize>, env_threads: Option<&str>) -> Result<u8, String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_betahankel"));
    cmd.arg(sub).arg("--config").arg(config).arg("--out").arg(out);
    if let Some(t) = threads {
        cmd.arg("--threads").arg(t.to_string());
    }
    match env_threads {
        Some(v) => cmd.env("RAYON_NUM_THREADS", v),
        None => cmd.env_remove("RAYON_NUM_THREADS"),
    };
    let o = cmd.output().map_err(|e| e.to_string())?;
    o.status.code().map(|c| c as u8).ok_or_else(|| "terminated by signal".to_string())
}

const VERIFY_CONFIG: &str = r#"{
  "verify": {"suites": ["transform", "kernel", "young"], "seed": 7, "young_pairs": 12}
}"#;

const EVOLVE_CONFIG: &str = r#"{
  "model": {"n": 3, "beta": 1, "k": 0},
  "grid": {"r_max": 16, "rho_max": 4000},
  "data": {"kind": "bump", "amplitude": 5, "width": 2, "power": 8},
  "evolution": {"t_end": 2, "steps": 40, "b": 1, "sign": "focusing", "q": 8, "blowup_threshold": 1e5},
  "triplets": [{"p": 8, "q": 8}, {"p": 12, "q": 8}]
}"#;

fn determinism() -> Outcome {
    let tmp = match tempfile::tempdir() {
        Ok(t) => t,
        Err(e) => return Outcome { pass: false, detail: format!("tempdir: {e}") },
    };
    let mut notes = Vec::new();
    let mut pass = true;
    for (sub, text) in [("verify", VERIFY_CONFIG), ("evolve", EVOLVE_CONFIG)] {
        let config = tmp.path().join(format!("{sub}.json"));
        std::fs::write(&config, text).unwrap();
        let runs: [(Option<usize>, Option<&str>); 3] = [(Some(1), None), (Some(4), None), (None, Some("3"))];
        let mut outputs = Vec::new();
        for (i, (threads, env)) in runs.into_iter().enumerate() {
            let out = tmp.path().join(format!("{sub}-{i}"));
            match run_cli(&config, sub, &out, threads, env) {
                Ok(code) if code == 0 || code == 3 => outputs.push(read_dir_bytes(&out)),
                Ok(code) => {
                    pass = false;
                    notes.push(format!("{sub} run {i} exited {code}"));
                }
                Err(e) => {
                    pass = false;
                    notes.push(format!("{sub} run {i}: {e}"));
                }
            }
        }
        let files = outputs.first().map(|o| o.len()).unwrap_or(0);
        let identical = outputs.len() == 3 && outputs.windows(2).all(|w| w[0] == w[1]) && files > 0;
        if !identical {
            pass = false;
        }
        notes.push(format!("{sub}: {files} files {}", if identical { "identical" } else { "DIFFER" }));
    }
    Outcome { pass, detail: format!("threads 1/4/env 3: {}", notes.join(", ")) }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 13] = [
        ("Bessel-Gaussian integral identity", Box::new(|| suite_outcome(Suite::Watson))),
        ("transform round trip, isometry, closed form", Box::new(|| suite_outcome(Suite::Transform))),
        ("transform diagonalizes the radial operator", Box::new(|| suite_outcome(Suite::Diagonalization))),
        ("kernel pair: transforms and positivity", Box::new(|| suite_outcome(Suite::Kernel))),
        ("unweighted heat semigroup reduction", Box::new(|| suite_outcome(Suite::Heat))),
        ("kernel norm power law in time", Box::new(|| suite_outcome(Suite::PowerLaw))),
        ("sharp-convolution Young inequality", Box::new(|| suite_outcome(Suite::Young))),
        ("triangle kernel identities", Box::new(|| suite_outcome(Suite::Delsarte))),
        ("smoothing estimate and decay rate", Box::new(|| suite_outcome(Suite::Smoothing))),
        ("mass conservation and positivity", Box::new(|| suite_outcome(Suite::Mass))),
        ("contraction constants and Picard rate", Box::new(|| suite_outcome(Suite::Contraction))),
        ("focusing blow-up rate", Box::new(|| suite_outcome(Suite::Blowup))),
        ("byte-identical outputs across thread counts", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (title, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let secs = start.elapsed().as_secs_f64();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {tag} {title} [{secs:.1}s]: {}", i + 1, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
