//! Packaged numerical check suites.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimates::{decay_exponent_fit, smoothing_constant};
use crate::evolution::{
    blowup_fit, existence_time, measure_contraction_constants, picard_differences, picard_solve,
    semigroup_apply, semigroup_apply_kernel, ContractionProbe, EvolutionConfig,
};
use crate::hankel::{apply_operator_a, hankel_forward, hankel_inverse, kernel_u, GridSizing, TransformPlan};
use crate::kernels::{kernel_k, oracle, semigroup_kernel, sharp_convolve, young_audit, GaussianFamily};
use crate::model_core::{classify_triplet, derive_params, ModelParams, NonlinearitySpec, Sign};
use crate::quadrature;
use crate::radial_numerics::{build_grid, geomspace, integrate_weighted, lp_norm_deta, RadialGrid};
use crate::specfun;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// pass iff measured <= tolerance
    AtMost,
    /// pass iff measured >= tolerance
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub anchor: String,
    pub measured: f64,
    pub tolerance: f64,
    pub relation: Relation,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, anchor: &str, measured: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            anchor: anchor.into(),
            measured,
            tolerance,
            relation: Relation::AtMost,
            pass: measured <= tolerance,
        }
    }

    pub fn at_least(name: impl Into<String>, anchor: &str, measured: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            anchor: anchor.into(),
            measured,
            tolerance,
            relation: Relation::AtLeast,
            pass: measured >= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    fn new(suite: Suite, checks: Vec<Check>) -> Self {
        SuiteReport { suite: suite.to_string(), passed: checks.iter().all(|c| c.pass), checks }
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Suite {
    Watson,
    Transform,
    Diagonalization,
    Kernel,
    Heat,
    PowerLaw,
    Young,
    Delsarte,
    Smoothing,
    Mass,
    Contraction,
    Blowup,
}

impl Suite {
    pub const ALL: [Suite; 12] = [
        Suite::Watson,
        Suite::Transform,
        Suite::Diagonalization,
        Suite::Kernel,
        Suite::Heat,
        Suite::PowerLaw,
        Suite::Young,
        Suite::Delsarte,
        Suite::Smoothing,
        Suite::Mass,
        Suite::Contraction,
        Suite::Blowup,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Watson => "watson",
            Suite::Transform => "transform",
            Suite::Diagonalization => "diagonalization",
            Suite::Kernel => "kernel",
            Suite::Heat => "heat",
            Suite::PowerLaw => "powerlaw",
            Suite::Young => "young",
            Suite::Delsarte => "delsarte",
            Suite::Smoothing => "smoothing",
            Suite::Mass => "mass",
            Suite::Contraction => "contraction",
            Suite::Blowup => "blowup",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .iter()
            .copied()
            .find(|x| x.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Suite::ALL.iter().map(|x| x.name()).collect();
                Error::InvalidParameter(format!("unknown suite '{s}' (expected one of {})", names.join(", ")))
            })
    }
}

/// Filters and seeds shared by the suites.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub n: Option<u32>,
    pub beta: Option<f64>,
    pub k: Option<u32>,
    pub seed: u64,
    pub young_pairs: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { n: None, beta: None, k: None, seed: 20240607, young_pairs: 100 }
    }
}

impl VerifyOptions {
    /// The suite's default parameter list restricted by the filters; when nothing
    /// survives, the filters themselves (k defaulting to 0) form the list.
    fn select(&self, defaults: &[(u32, f64, u32)]) -> Result<Vec<ModelParams>> {
        let kept: Vec<(u32, f64, u32)> = defaults
            .iter()
            .copied()
            .filter(|(n, b, k)| {
                self.n.is_none_or(|x| x == *n) && self.beta.is_none_or(|x| x == *b) && self.k.is_none_or(|x| x == *k)
            })
            .collect();
        let list = if kept.is_empty() {
            vec![(self.n.unwrap_or(3), self.beta.unwrap_or(1.0), self.k.unwrap_or(0))]
        } else {
            kept
        };
        list.into_iter().map(|(n, b, k)| derive_params(n, b, k)).collect()
    }
}

pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Result<SuiteReport> {
    let checks = match suite {
        Suite::Watson => watson()?,
        Suite::Transform => transform(opts)?,
        Suite::Diagonalization => diagonalization(opts)?,
        Suite::Kernel => kernel(opts)?,
        Suite::Heat => heat()?,
        Suite::PowerLaw => power_law(opts)?,
        Suite::Young => young(opts)?,
        Suite::Delsarte => delsarte(opts)?,
        Suite::Smoothing => smoothing(opts)?,
        Suite::Mass => mass(opts)?,
        Suite::Contraction => contraction()?,
        Suite::Blowup => blowup(opts)?,
    };
    Ok(SuiteReport::new(suite, checks))
}

fn tag(p: &ModelParams) -> String {
    format!("n={} beta={} k={}", p.n, p.beta, p.k)
}

fn lattice() -> Vec<(u32, f64, u32)> {
    let mut v = Vec::new();
    for n in [2, 3] {
        for b in [0.0, 0.5, 1.0] {
            for k in [0, 1, 2] {
                v.push((n, b, k));
            }
        }
    }
    v
}

/// sqrt(Σ (a−b)² x^e w / Σ b² x^e w) over the nodes with index in `range`.
fn rel_l2(a: &[f64], b: &[f64], grid: &RadialGrid, e: f64, range: std::ops::Range<usize>) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in range {
        let w = grid.nodes()[i].powf(e) * grid.weights()[i];
        num += (a[i] - b[i]).powi(2) * w;
        den += b[i] * b[i] * w;
    }
    (num / den).sqrt()
}

fn rel_max(a: &[f64], b: &[f64]) -> f64 {
    let m = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).fold(0.0f64, |e, (x, y)| e.max((x - y).abs())) / m
}

const ANCHOR_WATSON: &str = "Watson's Bessel-Gaussian integral";
const ANCHOR_INVERSE: &str = "inversion of the weighted Hankel transform";
const ANCHOR_ISOMETRY: &str = "weighted Parseval identity";
const ANCHOR_DIAG: &str = "transform diagonalizes r^beta A";
const ANCHOR_KERNEL: &str = "closed-form evolution kernel";
const ANCHOR_HEAT: &str = "beta = 0 heat flow";
const ANCHOR_SEMIGROUP: &str = "semigroup property";
const ANCHOR_POWER: &str = "kernel norm scaling in t";
const ANCHOR_YOUNG: &str = "Young inequality for the sharp convolution";
const ANCHOR_DELSARTE: &str = "Delsarte kernel integral identities";
const ANCHOR_SHARP: &str = "sharp convolution via the Delsarte kernel";
const ANCHOR_SMOOTH: &str = "Lp-Lq smoothing estimate";
const ANCHOR_MASS: &str = "weighted mass conservation";
const ANCHOR_POS: &str = "positivity of the evolution kernel";
const ANCHOR_CONTRACT: &str = "contraction of the Duhamel map";
const ANCHOR_BLOWUP: &str = "blow-up rate lower bound";

/// ∫₀^∞ J_ν(at) e^{−p²t²} t^{ν+1} dt against a^ν/(2p²)^{ν+1} e^{−a²/(4p²)}.
fn watson() -> Result<Vec<Check>> {
    let gl = quadrature::gauss_legendre(16)?;
    let mut out = Vec::new();
    for &nu in &[0.5, 1.0, 2.5] {
        for &a in &[0.5, 1.0, 2.0] {
            for &p in &[0.7, 1.0] {
                // e^{−p²t²} < 1e-30 beyond t_max
                let t_max = (70.0f64).sqrt() / p;
                let panels = 40;
                let edges: Vec<f64> = (0..=panels).map(|i| t_max * i as f64 / panels as f64).collect();
                let got = quadrature::integrate_panels(&edges, &gl, |t| {
                    specfun::bessel_j(nu, a * t).unwrap_or(f64::NAN) * (-p * p * t * t).exp() * t.powf(nu + 1.0)
                });
                let want = a.powf(nu) / (2.0 * p * p).powf(nu + 1.0) * (-a * a / (4.0 * p * p)).exp();
                out.push(Check::at_most(
                    format!("watson nu={nu} a={a} p={p}"),
                    ANCHOR_WATSON,
                    (got / want - 1.0).abs(),
                    1e-8,
                ));
            }
        }
    }
    Ok(out)
}

fn transform(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for p in opts.select(&lattice())? {
        let tb = p.two_minus_beta();
        let s = 1.0 / (tb * tb);
        let plan = TransformPlan::for_scales(p, s, s, &GridSizing::default())?;
        let (pg, sg) = (plan.physical_grid().clone(), plan.spectral_grid().clone());
        let e_phys = p.n as f64 - 1.0 - p.beta;
        let e_spec = p.n as f64 - 1.0 + p.beta;
        let fam = GaussianFamily::new(s, 1.0);
        let f = plan.physical_fn(|r| fam.physical(r, &p))?;
        let poly = plan.physical_fn(|r| (1.0 + r.powf(tb) / (tb * tb * s)) * fam.physical(r, &p))?;
        for (label, g) in [("gaussian", &f), ("gaussian*poly", &poly)] {
            let h = hankel_forward(g, &plan)?;
            let back = hankel_inverse(&h, &plan)?;
            out.push(Check::at_most(
                format!("round trip {label} {}", tag(&p)),
                ANCHOR_INVERSE,
                rel_l2(back.values(), g.values(), &pg, e_phys, 0..pg.len()),
                1e-6,
            ));
            let lhs: f64 = integrate_weighted(&h.map(|_, v| v * v)?, e_spec)?;
            let rhs: f64 = integrate_weighted(&g.map(|_, v| v * v)?, e_phys)?;
            out.push(Check::at_most(
                format!("isometry {label} {}", tag(&p)),
                ANCHOR_ISOMETRY,
                (lhs / rhs - 1.0).abs(),
                1e-6,
            ));
        }
        let h = hankel_forward(&f, &plan)?;
        let want = plan.spectral_fn(|rho| fam.spectral(rho, &p))?;
        out.push(Check::at_most(
            format!("forward closed form {}", tag(&p)),
            ANCHOR_INVERSE,
            rel_l2(h.values(), want.values(), &sg, e_spec, 0..sg.len()),
            1e-6,
        ));
    }
    Ok(out)
}

fn diagonalization(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for p in opts.select(&lattice())? {
        let tb = p.two_minus_beta();
        let s = 1.0 / (tb * tb);
        let plan = TransformPlan::for_scales(p, s, s, &GridSizing::default())?;
        let fam = GaussianFamily::new(s, 1.0);
        let phi = plan.physical_fn(|r| fam.physical(r, &p))?;
        let a = apply_operator_a(&phi, &p)?;
        let rba = a.values.map(|r, v| r.powf(p.beta) * v)?;
        let lhs = hankel_forward(&rba, &plan)?;
        let rhs = hankel_forward(&phi, &plan)?.map(|rho, v| rho.powf(tb) * v)?;
        let sg = plan.spectral_grid();
        let e_spec = p.n as f64 - 1.0 + p.beta;
        out.push(Check::at_most(
            format!("diagonalization {}", tag(&p)),
            ANCHOR_DIAG,
            rel_l2(lhs.values(), rhs.values(), sg, e_spec, 2..sg.len() - 2),
            1e-4,
        ));
    }
    Ok(out)
}

fn kernel(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let defaults = [(3, 1.0, 0), (3, 0.5, 1), (2, 0.0, 0), (2, 0.5, 2), (3, 0.0, 2)];
    let mut out = Vec::new();
    for p in opts.select(&defaults)? {
        let plan = TransformPlan::for_scales(p, 0.1, 10.0, &GridSizing::default())?;
        let tb = p.two_minus_beta();
        let e_spec = p.n as f64 - 1.0 + p.beta;
        for &t in &[0.1, 1.0, 10.0] {
            let spec = plan.spectral_fn(|rho| (-rho.powf(tb) * t).exp() * rho.powf(p.k as f64 - p.beta))?;
            let got = hankel_inverse(&spec, &plan)?;
            let want = plan.physical_fn(|r| kernel_k(r, t, &p).unwrap_or(f64::NAN))?;
            let err = lp_norm_deta(&got.axpy(-1.0, &want)?, 2.0, p.k)? / lp_norm_deta(&want, 2.0, p.k)?;
            out.push(Check::at_most(format!("inverse gives K t={t} {}", tag(&p)), ANCHOR_KERNEL, err, 1e-6));
            let fwd = hankel_forward(&want, &plan)?;
            let sg = plan.spectral_grid();
            out.push(Check::at_most(
                format!("forward of K t={t} {}", tag(&p)),
                ANCHOR_KERNEL,
                rel_l2(fwd.values(), spec.values(), sg, e_spec, 0..sg.len()),
                1e-6,
            ));
        }
        // K > 0 everywhere; the two-point kernel may underflow to 0 off the diagonal
        let mut bad = 0usize;
        for &t in &[1e-3, 0.1, 10.0] {
            for &r in &[1e-6, 0.01, 0.5, 3.0, 20.0] {
                let k = kernel_k(r, t, &p)?;
                let underflow = r.powf(p.two_minus_beta()) / (p.two_minus_beta().powi(2) * t) > 700.0;
                bad += usize::from(!(k > 0.0 || (underflow && k == 0.0)));
                for &rho in &[1e-5, 0.3, 2.0, 15.0] {
                    bad += usize::from(!(semigroup_kernel(rho, r, t, &p)? >= 0.0));
                }
            }
        }
        out.push(Check::at_most(format!("non-positive kernel samples {}", tag(&p)), ANCHOR_POS, bad as f64, 0.0));
    }
    Ok(out)
}

fn heat() -> Result<Vec<Check>> {
    let p = derive_params(3, 0.0, 0)?;
    let s = 1.0;
    let plan = TransformPlan::for_scales(p, s, s + 10.0, &GridSizing::default())?;
    let a = plan.physical_fn(|r| (-r * r / (4.0 * s)).exp())?;
    let mut out = Vec::new();
    for &t in &[0.1, 1.0, 10.0] {
        let got = semigroup_apply(&a, t, &plan)?;
        let want = plan.physical_fn(|r| (s / (s + t)).powf(1.5) * (-r * r / (4.0 * (s + t))).exp())?;
        out.push(Check::at_most(format!("heat solution t={t}"), ANCHOR_HEAT, rel_max(got.values(), want.values()), 1e-6));
    }
    let (t1, t2) = (0.5, 1.5);
    let two = semigroup_apply(&semigroup_apply(&a, t1, &plan)?, t2, &plan)?;
    let one = semigroup_apply(&a, t1 + t2, &plan)?;
    out.push(Check::at_most("composition S(1.5)S(0.5) = S(2)", ANCHOR_SEMIGROUP, rel_max(two.values(), one.values()), 1e-8));
    let quad = semigroup_apply_kernel(&a, 1.0)?;
    let spec = semigroup_apply(&a, 1.0, &plan)?;
    out.push(Check::at_most("kernel quadrature route t=1", ANCHOR_HEAT, rel_max(quad.values(), spec.values()), 1e-6));
    Ok(out)
}

fn power_law(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let combos: [(f64, (u32, f64, u32)); 6] = [
        (1.0, (3, 1.0, 0)),
        (2.0, (3, 1.0, 0)),
        (3.0, (3, 0.5, 1)),
        (1.5, (2, 0.0, 0)),
        (4.0, (2, 0.5, 2)),
        (f64::INFINITY, (3, 0.0, 1)),
    ];
    let filtered: Vec<(f64, ModelParams)> = {
        let wanted = opts.select(&combos.iter().map(|c| c.1).collect::<Vec<_>>())?;
        let mut v = Vec::new();
        for (m, c) in combos {
            if let Some(p) = wanted.iter().find(|p| (p.n, p.beta, p.k) == c) {
                v.push((m, *p));
            }
        }
        if v.is_empty() {
            v.extend(wanted.iter().map(|p| (2.0, *p)));
        }
        v
    };
    let mut out = Vec::new();
    for (m, p) in filtered {
        let tb = p.two_minus_beta();
        let r_max = (80.0 * tb * tb * 10.0f64).powf(1.0 / tb);
        let grid = std::sync::Arc::new(build_grid(1e-9, r_max, 240, 8)?);
        let times = geomspace(1e-2, 10.0, 13);
        let mut norms = Vec::with_capacity(times.len());
        for &t in &times {
            let f = crate::radial_numerics::GridFunction::from_fn(grid.clone(), crate::Space::Physical, p, |r| {
                kernel_k(r, t, &p).unwrap_or(f64::NAN)
            })?;
            norms.push(lp_norm_deta(&f, m, p.k)?);
        }
        let fitted = decay_exponent_fit(&times, &norms)?;
        let want = p.gamma * (1.0 / m - 1.0);
        out.push(Check::at_most(
            format!("exponent m={m} {} (expected {want})", tag(&p)),
            ANCHOR_POWER,
            (fitted - want).abs(),
            1e-3,
        ));
    }
    Ok(out)
}

/// One audited pair for one exponent triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct YoungRow {
    pub pair: usize,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// Young audits on `pairs` random nonnegative pairs, each f and g a sum of three
/// members r^k e^{−σ r^{2−β}} with weights in [0, 1) and σ in [0.5, 2].
pub fn young_sample(params: ModelParams, pairs: usize, triples: &[(f64, f64, f64)], seed: u64) -> Result<Vec<YoungRow>> {
    let tb = params.two_minus_beta();
    let (s_lo, s_hi) = (1.0 / (tb * tb * 2.0), 1.0 / (tb * tb * 0.5));
    let plan = TransformPlan::for_scales(params, s_lo, 2.0 * s_hi, &GridSizing::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random_fn = |rng: &mut ChaCha8Rng| -> Result<crate::GridFunction> {
        let terms: Vec<(f64, f64)> = (0..3).map(|_| (rng.gen_range(0.0..1.0), rng.gen_range(0.5..2.0))).collect();
        plan.physical_fn(|r| {
            let rk = r.powi(params.k as i32);
            terms.iter().map(|(c, sig)| c * rk * (-sig * r.powf(tb)).exp()).sum()
        })
    };
    let mut rows = Vec::with_capacity(pairs * triples.len());
    for pair in 0..pairs {
        let f = random_fn(&mut rng)?;
        let g = random_fn(&mut rng)?;
        for &(a, b, c) in triples {
            let au = young_audit(&f, &g, a, b, c, &plan)?;
            rows.push(YoungRow { pair, a, b, c, lhs: au.lhs, rhs: au.rhs, ratio: au.lhs / au.rhs });
        }
    }
    Ok(rows)
}

pub const YOUNG_TRIPLES: [(f64, f64, f64); 3] = [(1.0, 1.0, 1.0), (2.0, 4.0 / 3.0, 4.0 / 3.0), (3.0, 2.0, 1.2)];

fn young(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let defaults = [(3, 1.0, 0), (2, 0.5, 0), (3, 0.5, 1), (2, 0.0, 0), (3, 0.0, 2)];
    let sets = opts.select(&defaults)?;
    let per_set = opts.young_pairs.div_ceil(sets.len());
    let mut out = Vec::new();
    for (i, p) in sets.into_iter().enumerate() {
        let rows = young_sample(p, per_set, &YOUNG_TRIPLES, opts.seed.wrapping_add(i as u64))?;
        for (a, b, c) in YOUNG_TRIPLES {
            let worst = rows.iter().filter(|r| r.a == a).map(|r| r.ratio).fold(0.0f64, f64::max);
            out.push(Check::at_most(
                format!("max lhs/rhs over {per_set} pairs, (a,b,c)=({a},{b:.4},{c:.4}) {}", tag(&p)),
                ANCHOR_YOUNG,
                worst,
                1.0 + 1e-8,
            ));
        }
    }
    Ok(out)
}

fn delsarte(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let defaults = [(3, 1.0, 0), (3, 0.5, 1), (2, 0.5, 0)];
    let points = [(0.4, 0.7), (1.0, 1.0), (0.3, 1.9), (2.5, 1.2), (0.8, 3.0)];
    let nodes = 64;
    let mut out = Vec::new();
    for p in opts.select(&defaults)? {
        let c = p.young_constant();
        let kb = p.k as f64 - p.beta;
        let kf = p.k as f64;
        let mut worst = [0.0f64; 3];
        for &(u, v) in &points {
            let ix = oracle::identity_x(u, v, &p, nodes)?;
            worst[0] = worst[0].max((ix / (c * (u * v).powf(kb)) - 1.0).abs());
            let iy = oracle::identity_y(u, v, &p, nodes)?;
            worst[1] = worst[1].max((iy / (c * u.powf(kf) * v.powf(kb)) - 1.0).abs());
            let iz = oracle::identity_z(u, v, &p, nodes)?;
            worst[2] = worst[2].max((iz / (c * u.powf(kf) * v.powf(kb)) - 1.0).abs());
        }
        for (i, var) in ["x", "y", "z"].iter().enumerate() {
            out.push(Check::at_most(
                format!("integral over {var}, 5 points {}", tag(&p)),
                ANCHOR_DELSARTE,
                worst[i],
                1e-4,
            ));
        }
        // s^α U(xs) → Γ(μ+1)^{−1}(2−β)^{−μ} x^{k−β}
        let s = 1e-6f64;
        let x = 1.3f64;
        let lim = s.powf(p.alpha) * kernel_u(x * s, &p)?;
        out.push(Check::at_most(
            format!("small-argument limit of U {}", tag(&p)),
            ANCHOR_DELSARTE,
            (lim / (c * x.powf(kb)) - 1.0).abs(),
            1e-4,
        ));

        // spectral ♯ against the double-integral oracle on 64 outer nodes
        let tb = p.two_minus_beta();
        let (sf, sg) = (0.3, 0.5);
        let (ff, gf) = (GaussianFamily::new(sf, 1.0), GaussianFamily::new(sg, 1.0));
        let plan = TransformPlan::for_scales(p, sf, sf + sg, &GridSizing::default())?;
        let f = plan.physical_fn(|r| ff.physical(r, &p))?;
        let g = plan.physical_fn(|r| gf.physical(r, &p))?;
        let conv = sharp_convolve(&f, &g, &plan)?;
        let y_max = (40.0 * tb * tb * sg).powf(1.0 / tb);
        let nodes_phys = plan.physical_grid().nodes();
        let mut worst_sharp = 0.0f64;
        for &target in &[0.2, 0.7, 1.5] {
            let i = nodes_phys.partition_point(|&r| r < target);
            let x = nodes_phys[i];
            let o = oracle::sharp_at(|z| ff.physical(z, &p), |y| gf.physical(y, &p), x, y_max, &p, 64, 40)?;
            worst_sharp = worst_sharp.max((conv.values()[i] / o - 1.0).abs());
        }
        out.push(Check::at_most(format!("spectral sharp vs oracle {}", tag(&p)), ANCHOR_SHARP, worst_sharp, 1e-4));
    }
    Ok(out)
}

fn smoothing(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let defaults = [(3, 0.0, 0), (3, 1.0, 0), (2, 0.5, 1), (3, 0.5, 2)];
    let pairs = [(2.0, 2.0), (2.0, 1.0), (3.0, 2.0), (4.0, 2.0), (f64::INFINITY, 2.0), (f64::INFINITY, 1.0)];
    let mut out = Vec::new();
    for p in opts.select(&defaults)? {
        let s = 1.0;
        let plan = TransformPlan::for_scales(p, s, s + 100.0, &GridSizing::default())?;
        let fam = GaussianFamily::new(s, 1.0);
        let a = plan.physical_fn(|r| fam.physical(r, &p))?;
        let times = geomspace(1e-2, 1e2, 41);
        let flows = times.iter().map(|&t| semigroup_apply(&a, t, &plan)).collect::<Result<Vec<_>>>()?;
        for &(pp, qq) in &pairs {
            let c = smoothing_constant(pp, qq, &p)?;
            let aq = lp_norm_deta(&a, qq, p.k)?;
            let mut worst = 0.0f64;
            for (t, u) in times.iter().zip(&flows) {
                let ratio = lp_norm_deta(u, pp, p.k)? / (t.powf(p.gamma * (1.0 / pp - 1.0 / qq)) * aq);
                worst = worst.max(ratio / c);
            }
            out.push(Check::at_most(
                format!("max ratio/C (p,q)=({pp},{qq}) {}", tag(&p)),
                ANCHOR_SMOOTH,
                worst,
                1.0 + 1e-6,
            ));
        }
        // one constant for the modes k = 0..3 in L²(r^{n−1−β}dr)
        let mut worst = 0.0f64;
        for k in 0..=3 {
            let pk = p.with_k(k);
            let plan_k = TransformPlan::for_scales(pk, s, s + 100.0, &GridSizing::default())?;
            let ak = plan_k.physical_fn(|r| fam.physical(r, &pk))?;
            let e = pk.n as f64 - 1.0 - pk.beta;
            let base = integrate_weighted(&ak.map(|_, v| v * v)?, e)?;
            for &t in &[0.01, 1.0, 100.0] {
                let u = semigroup_apply(&ak, t, &plan_k)?;
                worst = worst.max(integrate_weighted(&u.map(|_, v| v * v)?, e)? / base);
            }
        }
        out.push(Check::at_most(format!("per-mode L2 bound k=0..3 {}", tag(&p)), ANCHOR_SMOOTH, worst, 1.0 + 1e-6));
        let cs: Vec<f64> = (0..=8).map(|k| smoothing_constant(4.0, 2.0, &p.with_k(k))).collect::<Result<_>>()?;
        let envelope = cs.iter().fold(0.0f64, |m, v| m.max(*v));
        out.push(Check::at_most(format!("C(4,2) envelope over k=0..8 {}", tag(&p)), ANCHOR_SMOOTH, envelope, 1.0));
    }
    // C(p,p) = 1 exactly
    let p = derive_params(3, 1.0, 0)?;
    let worst = [1.0, 1.5, 2.0, 7.0, f64::INFINITY]
        .iter()
        .map(|e| smoothing_constant(*e, *e, &p).map(|c| (c - 1.0).abs()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    out.push(Check::at_most("C(p,p) = 1", ANCHOR_SMOOTH, worst, 0.0));
    // large-t rate of ‖S(t)a‖_2 approaches the kernel rate γ(1/2 − 1)
    let p = opts.select(&[(3, 1.0, 0)])?[0];
    let s = 1.0;
    let plan = TransformPlan::for_scales(p, s, s + 1000.0, &GridSizing::default())?;
    let fam = GaussianFamily::new(s, 1.0);
    let a = plan.physical_fn(|r| fam.physical(r, &p))?;
    let times = geomspace(100.0, 1000.0, 9);
    let norms = times
        .iter()
        .map(|&t| semigroup_apply(&a, t, &plan).and_then(|u| lp_norm_deta(&u, 2.0, p.k)))
        .collect::<Result<Vec<_>>>()?;
    let fitted = decay_exponent_fit(&times, &norms)?;
    out.push(Check::at_most(
        format!("large-t decay exponent p=2 {}", tag(&p)),
        ANCHOR_SMOOTH,
        (fitted - p.gamma * (0.5 - 1.0)).abs(),
        1e-2,
    ));
    Ok(out)
}

fn mass(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let defaults = [(3, 1.0, 0), (2, 0.5, 0), (3, 0.0, 0)];
    let mut out = Vec::new();
    for p in opts.select(&defaults)? {
        if p.k != 0 {
            return Err(Error::InvalidParameter("the mass suite needs k = 0".into()));
        }
        let s = 0.5;
        let plan = TransformPlan::for_scales(p, s, s + 5.0, &GridSizing::default())?;
        let fam = GaussianFamily::new(s, 1.0);
        let tb = p.two_minus_beta();
        let two = GaussianFamily::new(2.0 * s, 0.5);
        let a = plan.physical_fn(|r| fam.physical(r, &p) + two.physical(r, &p) * (1.0 + r.powf(tb)))?;
        let e = p.n as f64 - 1.0 - p.beta;
        let m0 = integrate_weighted(&a, e)?;
        let (mut drift, mut lowest) = (0.0f64, 0.0f64);
        for t in (1..=10).map(|i| 0.5 * i as f64) {
            let u = semigroup_apply(&a, t, &plan)?;
            drift = drift.max((integrate_weighted(&u, e)? / m0 - 1.0).abs());
            lowest = lowest.min(u.values().iter().fold(0.0f64, |m, v| m.min(*v)));
        }
        out.push(Check::at_most(format!("mass drift over [0,5] {}", tag(&p)), ANCHOR_MASS, drift, 1e-6));
        out.push(Check::at_least(format!("min nodal value {}", tag(&p)), ANCHOR_POS, lowest, -1e-12));
    }
    Ok(out)
}

/// Constants for the (6,4,3) triplet, n = 3, β = 1, k = 0, b = 1.
pub struct ContractionSetup {
    pub params: ModelParams,
    pub triplet: crate::Triplet,
    pub nl: NonlinearitySpec,
    pub probe: ContractionProbe,
    pub probe_scales: Vec<f64>,
}

pub fn contraction_setup() -> Result<ContractionSetup> {
    let params = derive_params(3, 1.0, 0)?;
    let triplet = classify_triplet(6.0, 4.0, 3.0, &params)?;
    let nl = NonlinearitySpec::new(1.0, Sign::Focusing, &params)?;
    let probe_scales = vec![0.5, 1.0, 2.0];
    let probe = ContractionProbe { first_time: 1e-3, horizon: 40.0, samples: 60, window: 1.0, window_steps: 32, nonlinearity: nl };
    Ok(ContractionSetup { params, triplet, nl, probe, probe_scales })
}

/// Plan and probe set for the contraction measurement at one refinement level.
pub fn contraction_plan(setup: &ContractionSetup, refine: f64) -> Result<(TransformPlan, Vec<crate::GridFunction>)> {
    let taus = &setup.probe_scales;
    let (lo, hi) = (taus.iter().cloned().fold(f64::INFINITY, f64::min), taus.iter().cloned().fold(0.0, f64::max));
    let plan = TransformPlan::for_scales(setup.params, lo, hi + setup.probe.horizon, &GridSizing::default().refined(refine))?;
    // β = 1: e^{−r/τ} is the family member of scale τ
    let mut probes = taus.iter().map(|t| plan.physical_fn(|r| (-r / t).exp())).collect::<Result<Vec<_>>>()?;
    probes.push(plan.physical_fn(|r| (-r / 0.5).exp() - 0.3 * (-r / 2.0).exp())?);
    probes.push(plan.physical_fn(|r| (1.0 + r) * (-r).exp())?);
    probes.push(plan.physical_fn(|r| r * (-r / 0.7).exp())?);
    Ok((plan, probes))
}

fn contraction() -> Result<Vec<Check>> {
    let setup = contraction_setup()?;
    let mut out = Vec::new();
    let (plan, probes) = contraction_plan(&setup, 1.0)?;
    let base = measure_contraction_constants(&setup.triplet, &plan, &probes, &setup.probe)?;
    let (plan2, probes2) = contraction_plan(&setup, 2.0)?;
    // space and time resolution both doubled
    let probe2 = ContractionProbe { samples: 2 * setup.probe.samples, window_steps: 2 * setup.probe.window_steps, ..setup.probe };
    let fine = measure_contraction_constants(&setup.triplet, &plan2, &probes2, &probe2)?;
    out.push(Check::at_most("C1 change under grid doubling", ANCHOR_CONTRACT, (fine.c1 / base.c1 - 1.0).abs(), 0.1));
    out.push(Check::at_most("C2 change under grid doubling", ANCHOR_CONTRACT, (fine.c2 / base.c2 - 1.0).abs(), 0.1));
    let q = setup.triplet.q;
    for &amp in &[0.1, 0.3, 1.0, 3.0, 10.0] {
        let u0 = plan.physical_fn(|r| amp * (-r).exp())?;
        let norm = lp_norm_deta(&u0, q, 0)?;
        let t = existence_time(norm, &base, &setup.nl, q, setup.params.gamma)?;
        let diffs = picard_differences(&u0, t, 16, setup.nl, &setup.triplet, &plan, 12)?;
        let worst = diffs
            .windows(2)
            .filter(|w| w[0] > 1e-13 * diffs[0])
            .map(|w| w[1] / w[0])
            .fold(0.0f64, f64::max);
        out.push(Check::at_most(format!("Picard contraction ratio A={amp} T={t:.4e}"), ANCHOR_CONTRACT, worst, 0.55));
    }
    // p = q, m = ∞: sup_t ‖S(t)ψ‖_q ≤ ‖ψ‖_q
    let psi = &probes[0];
    let mut worst = 0.0f64;
    let nq = lp_norm_deta(psi, q, 0)?;
    for t in geomspace(1e-3, 40.0, 30) {
        worst = worst.max(lp_norm_deta(&semigroup_apply(psi, t, &plan)?, q, 0)? / nq);
    }
    out.push(Check::at_most("sup_t |S(t)psi|_q / |psi|_q", ANCHOR_SMOOTH, worst, 1.0 + 1e-6));
    Ok(out)
}

/// The focusing flat-bump run: n = 3, β = 1, k = 0, b = 1, q = 8.
pub fn blowup_run() -> Result<crate::evolution::Solution> {
    let p = derive_params(3, 1.0, 0)?;
    let plan = TransformPlan::for_extents(p, 16.0, 4000.0, &GridSizing::default())?;
    let u0 = plan.physical_fn(|r| 5.0 * (-(r / 2.0).powi(8)).exp())?;
    let nl = NonlinearitySpec::new(1.0, Sign::Focusing, &p)?;
    let q = 8.0;
    let mut cfg = EvolutionConfig::new(2.0, 40, nl, q);
    cfg.blowup_threshold = 2e3 * lp_norm_deta(&u0, q, 0)?;
    picard_solve(&u0, &cfg, &plan)
}

fn blowup(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let times: Vec<f64> = (0..200).map(|i| 1.0 - 10f64.powf(-4.0 * i as f64 / 199.0)).collect();
    let clean: Vec<f64> = times.iter().map(|t| (1.0 - t).powi(-2)).collect();
    let fit = blowup_fit(&times, &clean, 0.0)?;
    out.push(Check::at_most(
        "synthetic noiseless exponent error",
        ANCHOR_BLOWUP,
        (fit.exponent_fit.unwrap_or(f64::NAN) - 2.0).abs(),
        1e-6,
    ));
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let noisy: Vec<f64> = clean.iter().map(|v| v * (1.0 + 0.01 * 3f64.sqrt() * rng.gen_range(-1.0..1.0))).collect();
    let fit = blowup_fit(&times, &noisy, 0.0)?;
    out.push(Check::at_most(
        "synthetic 1% noise exponent error",
        ANCHOR_BLOWUP,
        (fit.exponent_fit.unwrap_or(f64::NAN) - 2.0).abs(),
        0.05,
    ));
    let sol = blowup_run()?;
    let r = sol.blowup;
    out.push(Check::at_least("focusing run detects blow-up", ANCHOR_BLOWUP, if r.detected { 1.0 } else { 0.0 }, 1.0));
    out.push(Check::at_least(
        format!("fitted exponent vs bound {} - 0.1", r.lower_bound_exponent),
        ANCHOR_BLOWUP,
        r.exponent_fit.unwrap_or(f64::NAN),
        r.lower_bound_exponent - 0.1,
    ));
    Ok(out)
}
