use serde::Serialize;

use betahankel::estimates::{decay_exponent_fit, norm_report, write_norm_reports};
use betahankel::evolution::{picard_solve, semigroup_apply, EvolutionConfig, Trajectory};
use betahankel::model_core::{admissible_m, classify_triplet};
use betahankel::radial_numerics::lp_norm_deta;
use betahankel::verify::{run_suite, young_sample, Suite, VerifyOptions, YOUNG_TRIPLES};
use betahankel::{Error, ModelParams, NonlinearitySpec, Result, Triplet, TripletKind};

use crate::config::{parse_exponent, DataSpec, RunConfig};
use crate::output::{exp_label, num, to_json, Csv, OutDir};
use crate::{Cli, Command, GridArgs, ModelArgs};

pub fn run(cli: Cli) -> Result<u8> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::InvalidParameter("--threads must be >= 1".into()));
        }
        // a second initialization can only fail if a pool already exists, which main never builds
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let out = OutDir::new(cli.out.clone().or(cfg.out.take()))?;
    match cli.command {
        Command::Params { model, triplets } => {
            merge_model(&mut cfg, &model);
            params(&cfg, triplets, &out)
        }
        Command::Verify { suite, model, seed, young_pairs } => {
            merge_model(&mut cfg, &model);
            if !suite.is_empty() {
                cfg.verify.suites = suite;
            }
            cfg.verify.seed = seed.or(cfg.verify.seed);
            cfg.verify.young_pairs = young_pairs.or(cfg.verify.young_pairs);
            verify(&cfg, &out)
        }
        Command::Evolve {
            model,
            grid,
            t_end,
            steps,
            b,
            sign,
            q,
            data,
            amplitude,
            scale,
            width,
            power,
            blowup_threshold,
            fail_on_blowup,
        } => {
            merge_model(&mut cfg, &model);
            merge_grid(&mut cfg, &grid);
            let e = &mut cfg.evolution;
            e.t_end = t_end.or(e.t_end);
            e.steps = steps.or(e.steps);
            e.b = b.or(e.b);
            e.sign = sign.or(e.sign);
            e.q = q.map(crate::config::Exponent).or(e.q);
            e.blowup_threshold = blowup_threshold.or(e.blowup_threshold);
            if fail_on_blowup {
                e.fail_on_blowup = Some(true);
            }
            cfg.data = Some(merge_data(cfg.data.take(), data.as_deref(), amplitude, scale, width, power)?);
            evolve(&cfg, &out)
        }
        Command::DecayFit { model, p, scale, t_min, t_max, samples } => {
            merge_model(&mut cfg, &model);
            let d = &mut cfg.decay_fit;
            if !p.is_empty() {
                d.p = p.into_iter().map(crate::config::Exponent).collect();
            }
            d.scale = scale.or(d.scale);
            d.t_min = t_min.or(d.t_min);
            d.t_max = t_max.or(d.t_max);
            d.samples = samples.or(d.samples);
            decay_fit(&cfg, &out)
        }
        Command::YoungAudit { model, pairs, seed, triple } => {
            merge_model(&mut cfg, &model);
            let y = &mut cfg.young;
            y.pairs = pairs.or(y.pairs);
            y.seed = seed.or(y.seed);
            if !triple.is_empty() {
                y.triples = triple.iter().map(|s| parse_triple(s)).collect::<Result<_>>()?;
            }
            young(&cfg, &out)
        }
    }
}

fn merge_model(cfg: &mut RunConfig, m: &ModelArgs) {
    cfg.model.n = m.n.or(cfg.model.n);
    cfg.model.beta = m.beta.or(cfg.model.beta);
    cfg.model.k = m.k.or(cfg.model.k);
}

fn merge_grid(cfg: &mut RunConfig, g: &GridArgs) {
    let c = &mut cfg.grid;
    c.tau_min = g.tau_min.or(c.tau_min);
    c.tau_max = g.tau_max.or(c.tau_max);
    c.r_max = g.r_max.or(c.r_max);
    c.rho_max = g.rho_max.or(c.rho_max);
    c.nodes_per_period = g.nodes_per_period.or(c.nodes_per_period);
}

fn merge_data(
    base: Option<DataSpec>,
    kind: Option<&str>,
    amplitude: Option<f64>,
    scale: Option<f64>,
    width: Option<f64>,
    power: Option<f64>,
) -> Result<DataSpec> {
    let base = match kind {
        None => base.unwrap_or_default(),
        Some("gaussian") => match base {
            Some(d @ DataSpec::Gaussian { .. }) => d,
            _ => DataSpec::Gaussian { scale: 1.0, amplitude: 1.0 },
        },
        Some("bump") => match base {
            Some(d @ DataSpec::Bump { .. }) => d,
            _ => DataSpec::Bump { amplitude: 1.0, width: 1.0, power: 2.0 },
        },
        Some("zero") => DataSpec::Zero,
        Some(other) => {
            return Err(Error::InvalidParameter(format!("unknown data kind '{other}' (gaussian, bump, zero)")))
        }
    };
    let data = match base {
        DataSpec::Gaussian { scale: s, amplitude: a } => {
            DataSpec::Gaussian { scale: scale.unwrap_or(s), amplitude: amplitude.unwrap_or(a) }
        }
        DataSpec::Bump { amplitude: a, width: w, power: p } => DataSpec::Bump {
            amplitude: amplitude.unwrap_or(a),
            width: width.unwrap_or(w),
            power: power.unwrap_or(p),
        },
        DataSpec::Zero => DataSpec::Zero,
    };
    data.validate()?;
    Ok(data)
}

fn parse_triple(s: &str) -> Result<[crate::config::Exponent; 3]> {
    let v: Vec<f64> = s
        .split(',')
        .map(parse_exponent)
        .collect::<std::result::Result<_, _>>()
        .map_err(Error::InvalidParameter)?;
    match v[..] {
        [a, b, c] => Ok([a, b, c].map(crate::config::Exponent)),
        _ => Err(Error::InvalidParameter(format!("triple '{s}' needs three comma-separated exponents"))),
    }
}

/// Triplets from the explicit list and the lattice; m defaults to the admissible relation.
fn triplet_rows(cfg: &RunConfig, lattice: Option<&str>, params: &ModelParams) -> Result<Vec<(f64, f64, f64)>> {
    let mut raw: Vec<(Option<f64>, f64, f64)> = cfg.triplets.iter().map(|t| (t.m.map(|m| m.0), t.p.0, t.q.0)).collect();
    if let Some(l) = lattice.or(cfg.triplet_lattice.as_deref()) {
        raw.extend(crate::config::expand_lattice(l)?);
    }
    raw.into_iter()
        .map(|(m, p, q)| {
            let m = match m {
                Some(m) => m,
                None if p >= q && q > 1.0 => admissible_m(p, q, params)?,
                None => f64::NAN,
            };
            Ok((m, p, q))
        })
        .collect()
}

/// Classification with out-of-range exponents reported as "neither".
fn classify_row(m: f64, p: f64, q: f64, params: &ModelParams) -> Triplet {
    classify_triplet(m, p, q, params).unwrap_or(Triplet { m, p, q, kind: TripletKind::Neither })
}

#[derive(Serialize)]
struct ParamsReport {
    n: u32,
    beta: f64,
    k: u32,
    lambda: f64,
    mu_k: f64,
    mu: f64,
    gamma: f64,
    alpha: f64,
    young_constant: f64,
}

fn params(cfg: &RunConfig, lattice: Option<String>, out: &OutDir) -> Result<u8> {
    let p = cfg.model.params()?;
    let report = ParamsReport {
        n: p.n,
        beta: p.beta,
        k: p.k,
        lambda: p.lambda,
        mu_k: p.mu_k,
        mu: p.mu,
        gamma: p.gamma,
        alpha: p.alpha,
        young_constant: p.young_constant(),
    };
    for (key, v) in [
        ("n", p.n as f64),
        ("beta", p.beta),
        ("k", p.k as f64),
        ("lambda", p.lambda),
        ("mu_k", p.mu_k),
        ("mu", p.mu),
        ("gamma", p.gamma),
        ("alpha", p.alpha),
        ("young_constant", report.young_constant),
    ] {
        println!("{key:<15} {v}");
    }
    out.write_json("params.json", &report)?;
    let rows = triplet_rows(cfg, lattice.as_deref(), &p)?;
    if !rows.is_empty() {
        let mut csv = Csv::new(&["m", "p", "q", "kind"]);
        for (m, pp, q) in rows {
            let t = classify_row(m, pp, q, &p);
            csv.row([exp_label(t.m), exp_label(t.p), exp_label(t.q), t.kind.as_str().to_string()]);
        }
        let bytes = csv.into_bytes();
        print!("{}", String::from_utf8_lossy(&bytes));
        out.write("triplets.csv", &bytes)?;
    }
    Ok(0)
}

#[derive(Serialize)]
struct CheckRow<'a> {
    suite: &'a str,
    name: &'a str,
    anchor: &'a str,
    measured: f64,
    tolerance: f64,
    relation: betahankel::verify::Relation,
    pass: bool,
}

fn verify(cfg: &RunConfig, out: &OutDir) -> Result<u8> {
    let v = &cfg.verify;
    if v.suites.is_empty() {
        return Err(Error::InvalidParameter("no suites selected (use --suite NAME[,NAME] or --suite all)".into()));
    }
    let mut suites = Vec::new();
    for s in &v.suites {
        if s == "all" {
            suites.extend(Suite::ALL);
        } else {
            suites.push(s.parse::<Suite>()?);
        }
    }
    suites.sort();
    suites.dedup();
    let defaults = VerifyOptions::default();
    let opts = VerifyOptions {
        n: cfg.model.n,
        beta: cfg.model.beta,
        k: cfg.model.k,
        seed: v.seed.unwrap_or(defaults.seed),
        young_pairs: v.young_pairs.unwrap_or(defaults.young_pairs),
    };
    if let Some(b) = opts.beta {
        // filters must still name a valid model
        betahankel::derive_params(opts.n.unwrap_or(3), b, opts.k.unwrap_or(0))?;
    }
    let mut reports = Vec::new();
    for s in suites {
        let r = run_suite(s, &opts)?;
        let passed = r.checks.iter().filter(|c| c.pass).count();
        println!("{:<16} {passed}/{} checks passed", r.suite, r.checks.len());
        for c in r.failures() {
            println!("  FAIL {}: measured {:e}, tolerance {:e}", c.name, c.measured, c.tolerance);
        }
        reports.push(r);
    }
    let rows: Vec<CheckRow> = reports
        .iter()
        .flat_map(|r| {
            r.checks.iter().map(|c| CheckRow {
                suite: &r.suite,
                name: &c.name,
                anchor: &c.anchor,
                measured: c.measured,
                tolerance: c.tolerance,
                relation: c.relation,
                pass: c.pass,
            })
        })
        .collect();
    if out.is_set() {
        out.write_json("verify.json", &rows)?;
    } else {
        print!("{}", String::from_utf8_lossy(&to_json(&rows)?));
    }
    Ok(if reports.iter().all(|r| r.passed) { 0 } else { 2 })
}

#[derive(Serialize)]
struct EvolveReport {
    n: u32,
    beta: f64,
    k: u32,
    b: f64,
    sign: betahankel::Sign,
    q: f64,
    t_end: f64,
    final_time: f64,
    completed: bool,
    samples: usize,
    windows: usize,
    max_picard_iterations: usize,
    nodes: usize,
    detected: bool,
    t_star_fit: Option<f64>,
    exponent_fit: Option<f64>,
    prefactor_fit: Option<f64>,
    lower_bound_exponent: f64,
    fit_samples: usize,
}

fn evolve(cfg: &RunConfig, out: &OutDir) -> Result<u8> {
    let p = cfg.model.params()?;
    let e = &cfg.evolution;
    let data = cfg.data.clone().unwrap_or_default();
    data.validate()?;
    let t_end = e.t_end.unwrap_or(1.0);
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParameter(format!("t_end = {t_end} must be positive")));
    }
    let nl = NonlinearitySpec::new(e.b.unwrap_or(1.0), e.sign.unwrap_or_default().into(), &p)?;
    let q = e.q.map(|x| x.0).unwrap_or(2.0);
    let mut ec = EvolutionConfig::new(t_end, e.steps.unwrap_or(20), nl, q);
    if let Some(v) = e.picard_tol {
        ec.picard_tol = v;
    }
    if let Some(v) = e.picard_max_iter {
        ec.picard_max_iter = v;
    }
    if let Some(v) = e.blowup_threshold {
        ec.blowup_threshold = v;
    }
    if let Some(v) = e.substeps {
        ec.substeps = v;
    }
    if let Some(v) = e.max_halvings {
        ec.max_halvings = v;
    }
    if let Some(v) = e.max_windows {
        ec.max_windows = v;
    }
    let triplets: Vec<Triplet> = triplet_rows(cfg, None, &p)?
        .into_iter()
        .map(|(m, pp, qq)| classify_triplet(m, pp, qq, &p))
        .collect::<Result<_>>()?;
    ec.triplet = triplets.first().copied();
    ec.validate()?;
    let s = data.scale_hint();
    let plan = cfg.grid.plan(p, s, s + t_end)?;
    let u0 = data.sample(&plan)?;
    let sol = picard_solve(&u0, &ec, &plan)?;
    let traj = &sol.trajectory;
    let completed = !sol.blowup.detected && traj.final_time() >= t_end * (1.0 - 1e-12);
    let report = EvolveReport {
        n: p.n,
        beta: p.beta,
        k: p.k,
        b: nl.b,
        sign: nl.sign,
        q,
        t_end,
        final_time: traj.final_time(),
        completed,
        samples: traj.len(),
        windows: sol.windows.len(),
        max_picard_iterations: sol.windows.iter().map(|w| w.iterations).max().unwrap_or(0),
        nodes: plan.physical_grid().len(),
        detected: sol.blowup.detected,
        t_star_fit: sol.blowup.t_star_fit,
        exponent_fit: sol.blowup.exponent_fit,
        prefactor_fit: sol.blowup.prefactor_fit,
        lower_bound_exponent: sol.blowup.lower_bound_exponent,
        fit_samples: sol.blowup.fit_samples,
    };
    let mut traj_csv = Vec::new();
    traj.write_csv(&mut traj_csv)?;
    out.write("trajectory.csv", &traj_csv)?;
    let mut win = Csv::new(&["start", "length", "iterations", "residual", "halvings"]);
    for w in &sol.windows {
        win.row([num(w.start), num(w.length), w.iterations.to_string(), num(w.residual), w.halvings.to_string()]);
    }
    out.write("windows.csv", &win.into_bytes())?;
    if let Some(last) = traj.states.last() {
        let mut buf = Vec::new();
        last.write_csv(&mut buf)?;
        out.write("final_state.csv", &buf)?;
    }
    if !triplets.is_empty() {
        let rows = triplets
            .iter()
            .map(|t| norm_report(traj, t, p.k).map(|r| ("solution".to_string(), r)))
            .collect::<Result<Vec<_>>>()?;
        let mut buf = Vec::new();
        write_norm_reports(&rows, &mut buf)?;
        out.write("norm_reports.csv", &buf)?;
    }
    out.write_json("evolve.json", &report)?;
    print!("{}", String::from_utf8_lossy(&to_json(&report)?));
    if report.detected && e.fail_on_blowup.unwrap_or(false) {
        return Ok(3);
    }
    Ok(0)
}

#[derive(Serialize)]
struct DecayRow {
    n: u32,
    beta: f64,
    k: u32,
    p: f64,
    fitted_exponent: f64,
    expected_exponent: f64,
    abs_error: f64,
}

fn decay_fit(cfg: &RunConfig, out: &OutDir) -> Result<u8> {
    let params = cfg.model.params()?;
    let d = &cfg.decay_fit;
    let ps: Vec<f64> = if d.p.is_empty() { vec![2.0] } else { d.p.iter().map(|e| e.0).collect() };
    let scale = d.scale.unwrap_or(1.0);
    let (t_min, t_max) = (d.t_min.unwrap_or(100.0), d.t_max.unwrap_or(1000.0));
    let samples = d.samples.unwrap_or(9);
    if !(scale > 0.0 && t_min > 0.0 && t_max > t_min && samples >= 5) {
        return Err(Error::InvalidParameter("decay fit needs scale > 0, 0 < t_min < t_max and samples >= 5".into()));
    }
    if let Some(bad) = ps.iter().find(|p| p.is_nan() || **p < 1.0) {
        return Err(Error::InvalidParameter(format!("norm exponent p = {bad} must be >= 1")));
    }
    let plan = cfg.grid.plan(params, scale, scale + t_max)?;
    let data = DataSpec::Gaussian { scale, amplitude: 1.0 };
    let a = data.sample(&plan)?;
    let ratio = (t_max / t_min).powf(1.0 / (samples - 1) as f64);
    let times: Vec<f64> = (0..samples).map(|i| if i + 1 == samples { t_max } else { t_min * ratio.powi(i as i32) }).collect();
    let states = times.iter().map(|&t| semigroup_apply(&a, t, &plan)).collect::<Result<Vec<_>>>()?;
    let mut csv = Csv::new(&["t", "p", "norm"]);
    let mut rows = Vec::new();
    for &pp in &ps {
        let norms = states.iter().map(|u| lp_norm_deta(u, pp, params.k)).collect::<Result<Vec<_>>>()?;
        for (t, v) in times.iter().zip(&norms) {
            csv.row([num(*t), exp_label(pp), num(*v)]);
        }
        let fitted = decay_exponent_fit(&times, &norms)?;
        let expected = params.gamma * (1.0 / pp - 1.0);
        println!("p = {:<6} fitted {fitted:.6} expected {expected:.6}", exp_label(pp));
        rows.push(DecayRow {
            n: params.n,
            beta: params.beta,
            k: params.k,
            p: pp,
            fitted_exponent: fitted,
            expected_exponent: expected,
            abs_error: (fitted - expected).abs(),
        });
    }
    out.write("decay.csv", &csv.into_bytes())?;
    out.write_json("decay.json", &rows)?;
    let triplets = triplet_rows(cfg, None, &params)?;
    if !triplets.is_empty() {
        let mut all_t = vec![0.0];
        all_t.extend(&times);
        let mut all_s = vec![a.clone()];
        all_s.extend(states);
        let mut reports = Vec::new();
        for (m, pp, qq) in triplets {
            let t = classify_triplet(m, pp, qq, &params)?;
            let traj = Trajectory::new(all_t.clone(), all_s.clone(), qq, Some(t))?;
            reports.push((format!("gaussian_s{scale}"), norm_report(&traj, &t, params.k)?));
        }
        let mut buf = Vec::new();
        write_norm_reports(&reports, &mut buf)?;
        out.write("norm_reports.csv", &buf)?;
    }
    Ok(0)
}

#[derive(Serialize)]
struct YoungSummary {
    n: u32,
    beta: f64,
    k: u32,
    pairs: usize,
    seed: u64,
    audits: usize,
    worst_ratio: f64,
    all_hold: bool,
}

fn young(cfg: &RunConfig, out: &OutDir) -> Result<u8> {
    let params = cfg.model.params()?;
    let y = &cfg.young;
    let pairs = y.pairs.unwrap_or(20);
    let seed = y.seed.unwrap_or(VerifyOptions::default().seed);
    if pairs == 0 {
        return Err(Error::InvalidParameter("pairs must be >= 1".into()));
    }
    let triples: Vec<(f64, f64, f64)> =
        if y.triples.is_empty() { YOUNG_TRIPLES.to_vec() } else { y.triples.iter().map(|t| (t[0].0, t[1].0, t[2].0)).collect() };
    let rows = young_sample(params, pairs, &triples, seed)?;
    let mut csv = Csv::new(&["pair", "a", "b", "c", "lhs", "rhs", "ratio"]);
    for r in &rows {
        csv.row([r.pair.to_string(), num(r.a), num(r.b), num(r.c), num(r.lhs), num(r.rhs), num(r.ratio)]);
    }
    let worst = rows.iter().map(|r| r.ratio).fold(0.0f64, f64::max);
    let summary = YoungSummary {
        n: params.n,
        beta: params.beta,
        k: params.k,
        pairs,
        seed,
        audits: rows.len(),
        worst_ratio: worst,
        all_hold: rows.iter().all(|r| r.ratio <= 1.0 + 1e-8),
    };
    out.write("young.csv", &csv.into_bytes())?;
    out.write_json("young.json", &summary)?;
    print!("{}", String::from_utf8_lossy(&to_json(&summary)?));
    Ok(if summary.all_hold { 0 } else { 2 })
}
