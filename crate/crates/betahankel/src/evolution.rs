//! Linear semigroup, Duhamel operator and the Picard mild-solution solver.

use std::io::Write;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimates::x_norm_values;
use crate::hankel::{hankel_forward, hankel_inverse, TransformPlan};
use crate::kernels::semigroup_kernel;
use crate::model_core::{NonlinearitySpec, Triplet};
use crate::radial_numerics::{geomspace, lp_norm_values, GridFunction};

/// S(t)a = H⁻¹(exp(−ρ^{2−β}t) Ha).
pub fn semigroup_apply(a: &GridFunction, t: f64, plan: &TransformPlan) -> Result<GridFunction> {
    check_nonneg_time(t)?;
    plan.check_physical(a)?;
    if t == 0.0 {
        return Ok(a.clone());
    }
    let ha = hankel_forward(a, plan)?;
    let tb = plan.params().two_minus_beta();
    let damped = ha.map(|rho, v| v * (-rho.powf(tb) * t).exp())?;
    hankel_inverse(&damped, plan)
}

/// S(t)a(r) = ∫ K̃(ρ,r,t) a(ρ) ρ^{n−1} dρ, by quadrature on a's own grid.
///
/// Independent of the transform matrices; accurate only while K̃ is resolved
/// by the grid, i.e. for t not too small against the local node spacing.
pub fn semigroup_apply_kernel(a: &GridFunction, t: f64) -> Result<GridFunction> {
    check_nonneg_time(t)?;
    if t == 0.0 {
        return Ok(a.clone());
    }
    let g = a.grid();
    let params = *a.params();
    let n = params.n as i32;
    let src: Vec<(f64, f64)> = g
        .nodes()
        .iter()
        .zip(g.weights())
        .zip(a.values())
        .map(|((rho, w), v)| (*rho, v * rho.powi(n - 1) * w))
        .collect();
    let out = g
        .nodes()
        .par_iter()
        .map(|&r| {
            let mut s = 0.0;
            for &(rho, wv) in &src {
                if wv != 0.0 {
                    s += semigroup_kernel(rho, r, t, &params)? * wv;
                }
            }
            Ok(s)
        })
        .collect::<Result<Vec<f64>>>()?;
    a.with_values(out)
}

fn check_nonneg_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("time t = {t} must be finite and >= 0")));
    }
    Ok(())
}

/// Time history of physical-space states with their norms.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<GridFunction>,
    /// ‖u(t)/r^k‖ in L^q_{dη}
    pub norms_q: Vec<f64>,
    /// t^{1/m}‖u(t)/r^k‖ in L^p_{dη}, present when a triplet is attached
    pub norms_p_weighted: Option<Vec<f64>>,
    pub q: f64,
    pub triplet: Option<Triplet>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<GridFunction>, q: f64, triplet: Option<Triplet>) -> Result<Self> {
        if times.is_empty() || times.len() != states.len() {
            return Err(Error::InvalidParameter(format!(
                "trajectory needs matching nonempty times and states ({} vs {})",
                times.len(),
                states.len()
            )));
        }
        if times[0] != 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("trajectory times must start at 0 and increase strictly".into()));
        }
        if !(q >= 1.0) {
            return Err(Error::InvalidParameter(format!("report exponent q = {q} must be >= 1")));
        }
        let grid = states[0].grid().clone();
        if states.iter().any(|s| !crate::radial_numerics::same_grid(s.grid(), &grid) || s.space() != states[0].space()) {
            return Err(Error::GridMismatch("trajectory states live on different grids".into()));
        }
        let k = states[0].params().k;
        let norms_q = states.iter().map(|s| lp_norm_values(s.values(), s.grid(), s.params(), q, k)).collect();
        let norms_p_weighted = triplet.map(|tr| {
            states
                .iter()
                .zip(&times)
                .map(|(s, t)| t.powf(1.0 / tr.m) * lp_norm_values(s.values(), s.grid(), s.params(), tr.p, k))
                .collect()
        });
        Ok(Trajectory { times, states, norms_q, norms_p_weighted, q, triplet })
    }

    /// Time-constant trajectory on a uniform grid of `steps` intervals over [0, t_end].
    pub fn constant(f: &GridFunction, t_end: f64, steps: usize, q: f64) -> Result<Self> {
        if !(t_end > 0.0) || steps == 0 {
            return Err(Error::InvalidParameter("constant trajectory needs t_end > 0 and steps >= 1".into()));
        }
        let times: Vec<f64> = (0..=steps).map(|i| t_end * i as f64 / steps as f64).collect();
        let states = vec![f.clone(); times.len()];
        Self::new(times, states, q, None)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("nonempty")
    }

    /// Linear interpolation in time between recorded states.
    pub fn state_at(&self, t: f64) -> Result<Vec<f64>> {
        let last = self.final_time();
        if !(t >= 0.0) || t > last * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!("time {t} outside the trajectory range [0, {last}]")));
        }
        let i = self.times.partition_point(|&s| s <= t);
        if i == 0 {
            return Ok(self.states[0].values().to_vec());
        }
        if i >= self.times.len() {
            return Ok(self.states[self.times.len() - 1].values().to_vec());
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let w = (t - t0) / (t1 - t0);
        Ok(self.states[i - 1]
            .values()
            .iter()
            .zip(self.states[i].values())
            .map(|(a, b)| (1.0 - w) * a + w * b)
            .collect())
    }

    /// Index of the recorded time closest to t.
    pub fn nearest_index(&self, t: f64) -> usize {
        let mut best = 0;
        for (i, s) in self.times.iter().enumerate() {
            if (s - t).abs() < (self.times[best] - t).abs() {
                best = i;
            }
        }
        best
    }

    /// CSV with columns t,norm_q,norm_p_weighted (last column empty without a triplet).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "norm_q", "norm_p_weighted"])?;
        for i in 0..self.times.len() {
            let weighted = match &self.norms_p_weighted {
                Some(v) => format!("{:.16e}", v[i]),
                None => String::new(),
            };
            wr.write_record([format!("{:.16e}", self.times[i]), format!("{:.16e}", self.norms_q[i]), weighted])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// 𝔾f(t) = ∫₀^t S(t−τ) f(τ) dτ by the composite midpoint rule with `steps` panels,
/// summed in the spectral domain; f between recorded times is interpolated linearly.
pub fn duhamel(forcing: &Trajectory, t: f64, plan: &TransformPlan, steps: usize) -> Result<GridFunction> {
    check_nonneg_time(t)?;
    if steps == 0 {
        return Err(Error::InvalidParameter("duhamel needs steps >= 1".into()));
    }
    plan.check_physical(&forcing.states[0])?;
    if forcing.final_time() < t * (1.0 - 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "forcing covers [0, {}] but t = {t}",
            forcing.final_time()
        )));
    }
    if t == 0.0 {
        return Ok(plan.physical_zeros());
    }
    let tb = plan.params().two_minus_beta();
    let lam: Vec<f64> = plan.spectral_grid().nodes().iter().map(|r| r.powf(tb)).collect();
    let d = t / steps as f64;
    let mut acc = vec![0.0; lam.len()];
    for i in 0..steps {
        let tau = (i as f64 + 0.5) * d;
        let fh = plan.forward_values(&forcing.state_at(tau)?);
        for ((a, l), f) in acc.iter_mut().zip(&lam).zip(&fh) {
            *a += d * (-l * (t - tau)).exp() * f;
        }
    }
    plan.physical_from(plan.inverse_values(&acc))
}

/// 𝔾f at every recorded time of the forcing, one midpoint panel per interval
/// with the interval average of f as the midpoint value.
pub fn duhamel_path(forcing: &Trajectory, plan: &TransformPlan) -> Result<Vec<GridFunction>> {
    plan.check_physical(&forcing.states[0])?;
    let tb = plan.params().two_minus_beta();
    let lam: Vec<f64> = plan.spectral_grid().nodes().iter().map(|r| r.powf(tb)).collect();
    let mut acc = vec![0.0; lam.len()];
    let mut out = vec![plan.physical_zeros()];
    for (j, w) in forcing.times.windows(2).enumerate() {
        let d = w[1] - w[0];
        let avg: Vec<f64> = forcing.states[j]
            .values()
            .iter()
            .zip(forcing.states[j + 1].values())
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        let fh = plan.forward_values(&avg);
        for ((a, l), f) in acc.iter_mut().zip(&lam).zip(&fh) {
            *a = (-l * d).exp() * *a + d * (-0.5 * l * d).exp() * f;
        }
        out.push(plan.physical_from(plan.inverse_values(&acc))?);
    }
    Ok(out)
}

/// One Picard window [t0, t0 + length] split into equal substeps.
///
/// States are the M+1 physical values at the substep times. The Duhamel term
/// uses the substep average of F as the midpoint value:
/// acc_j = e^{−λd} acc_{j−1} + d e^{−λd/2} H F((u_{j−1}+u_j)/2).
pub struct PicardWindow<'a> {
    plan: &'a TransformPlan,
    nl: NonlinearitySpec,
    step: f64,
    linear: Vec<Vec<f64>>,
    decay: Vec<f64>,
    half: Vec<f64>,
}

impl<'a> PicardWindow<'a> {
    pub fn new(plan: &'a TransformPlan, u0: &[f64], length: f64, substeps: usize, nl: NonlinearitySpec) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) || substeps == 0 {
            return Err(Error::InvalidParameter(format!(
                "window needs length > 0 and substeps >= 1 (got {length}, {substeps})"
            )));
        }
        let tb = plan.params().two_minus_beta();
        let d = length / substeps as f64;
        let lam: Vec<f64> = plan.spectral_grid().nodes().iter().map(|r| r.powf(tb)).collect();
        let decay: Vec<f64> = lam.iter().map(|l| (-l * d).exp()).collect();
        let half: Vec<f64> = lam.iter().map(|l| d * (-0.5 * l * d).exp()).collect();
        let u0h = plan.forward_values(u0);
        let mut linear = Vec::with_capacity(substeps + 1);
        linear.push(u0.to_vec());
        let mut cur = u0h;
        for _ in 0..substeps {
            for (c, e) in cur.iter_mut().zip(&decay) {
                *c *= e;
            }
            linear.push(plan.inverse_values(&cur));
        }
        Ok(PicardWindow { plan, nl, step: d, linear, decay, half })
    }

    pub fn substeps(&self) -> usize {
        self.linear.len() - 1
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Offsets of the substep times from the window start.
    pub fn times(&self) -> Vec<f64> {
        (0..self.linear.len()).map(|j| j as f64 * self.step).collect()
    }

    /// S(t_j)u₀ at the substep times.
    pub fn linear(&self) -> &[Vec<f64>] {
        &self.linear
    }

    /// 𝔾(F(u)) at the substep times, for a path u given at the same times.
    pub fn duhamel_part(&self, u: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if u.len() != self.linear.len() {
            return Err(Error::GridMismatch(format!("path has {} states, window {}", u.len(), self.linear.len())));
        }
        let len = u[0].len();
        let forcing: Vec<Vec<f64>> = (0..self.substeps())
            .into_par_iter()
            .map(|i| {
                let mid: Vec<f64> = (0..len).map(|r| self.nl.apply(0.5 * (u[i][r] + u[i + 1][r]))).collect();
                self.plan.forward_values(&mid)
            })
            .collect();
        let mut acc = vec![0.0; self.decay.len()];
        let mut out = Vec::with_capacity(u.len());
        out.push(vec![0.0; len]);
        for fh in &forcing {
            for (((a, e), h), f) in acc.iter_mut().zip(&self.decay).zip(&self.half).zip(fh) {
                *a = e * *a + h * f;
            }
            out.push(self.plan.inverse_values(&acc));
        }
        Ok(out)
    }

    /// 𝒯u = S(t)u₀ + 𝔾(F(u)).
    pub fn apply(&self, u: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let mut g = self.duhamel_part(u)?;
        for (gj, lj) in g.iter_mut().zip(&self.linear) {
            for (a, b) in gj.iter_mut().zip(lj) {
                *a += b;
            }
        }
        if g.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Picard iterate".into()));
        }
        Ok(g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionConstants {
    pub c1: f64,
    pub c2: f64,
    /// index of the probe attaining c1
    pub c1_probe: usize,
    pub c2_probe: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionConfig {
    pub t_end: f64,
    pub steps: usize,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    pub blowup_threshold: f64,
    pub nonlinearity: NonlinearitySpec,
    /// report exponent for norms and for the Picard residual
    pub q: f64,
    pub substeps: usize,
    pub max_halvings: u32,
    pub max_windows: usize,
    /// when set, windows also respect the smallness condition for these constants
    pub constants: Option<ContractionConstants>,
    pub triplet: Option<Triplet>,
}

impl EvolutionConfig {
    pub fn new(t_end: f64, steps: usize, nonlinearity: NonlinearitySpec, q: f64) -> Self {
        EvolutionConfig {
            t_end,
            steps,
            picard_tol: 1e-10,
            picard_max_iter: 50,
            blowup_threshold: 1e12,
            nonlinearity,
            q,
            substeps: 4,
            max_halvings: 12,
            max_windows: 200_000,
            constants: None,
            triplet: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end = {} must be positive", self.t_end));
        }
        if self.steps == 0 || self.substeps == 0 || self.picard_max_iter == 0 || self.max_windows == 0 {
            return bad("steps, substeps, picard_max_iter and max_windows must be >= 1".into());
        }
        if !(self.picard_tol > 0.0) {
            return bad(format!("picard_tol = {} must be positive", self.picard_tol));
        }
        if !(self.blowup_threshold > 0.0) {
            return bad(format!("blowup_threshold = {} must be positive", self.blowup_threshold));
        }
        if !(self.q >= 1.0) {
            return bad(format!("report exponent q = {} must be >= 1", self.q));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlowupReport {
    pub detected: bool,
    pub t_star_fit: Option<f64>,
    pub exponent_fit: Option<f64>,
    pub prefactor_fit: Option<f64>,
    /// 1/b − γ/q
    pub lower_bound_exponent: f64,
    pub fit_samples: usize,
}

impl BlowupReport {
    fn none(lower_bound_exponent: f64) -> Self {
        BlowupReport {
            detected: false,
            t_star_fit: None,
            exponent_fit: None,
            prefactor_fit: None,
            lower_bound_exponent,
            fit_samples: 0,
        }
    }
}

/// Per-window solver statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowStats {
    pub start: f64,
    pub length: f64,
    pub iterations: usize,
    pub residual: f64,
    pub halvings: u32,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub trajectory: Trajectory,
    pub blowup: BlowupReport,
    pub windows: Vec<WindowStats>,
}

fn relative_residual(new: &[Vec<f64>], old: &[Vec<f64>], plan: &TransformPlan, q: f64) -> f64 {
    let (grid, params) = (plan.physical_grid(), plan.params());
    let k = params.k;
    let mut worst: f64 = 0.0;
    for (a, b) in new.iter().zip(old).skip(1) {
        let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        let dn = lp_norm_values(&diff, grid, params, q, k);
        if dn == 0.0 {
            continue;
        }
        let nn = lp_norm_values(a, grid, params, q, k);
        worst = worst.max(if nn > 0.0 { dn / nn } else { f64::INFINITY });
    }
    worst
}

/// Iterates 𝒯 from the linear path until the relative residual drops below tol.
fn solve_window(window: &PicardWindow, cfg: &EvolutionConfig, plan: &TransformPlan) -> Result<(Vec<Vec<f64>>, usize, f64)> {
    let mut u = window.linear().to_vec();
    let mut residual = f64::INFINITY;
    for it in 1..=cfg.picard_max_iter {
        let new = window.apply(&u)?;
        residual = relative_residual(&new, &u, plan, cfg.q);
        u = new;
        if residual <= cfg.picard_tol {
            return Ok((u, it, residual));
        }
        if !residual.is_finite() {
            break;
        }
    }
    Err(Error::NonConvergence(format!(
        "residual {residual:.3e} after {} iterations",
        cfg.picard_max_iter
    )))
}

/// Mild solution of ∂ₜu + r^βA u = ±|u|^b u by Picard iteration on successive windows.
///
/// Window length is the smallest of t_end/steps, the remaining time, the L^∞
/// existence time 1/(2^{b+1}‖u‖_∞^b) and, with constants attached, the
/// smallness-condition time. A window whose iteration fails is halved.
pub fn picard_solve(u0: &GridFunction, cfg: &EvolutionConfig, plan: &TransformPlan) -> Result<Solution> {
    cfg.validate()?;
    plan.check_physical(u0)?;
    let nl = cfg.nonlinearity;
    let params = *plan.params();
    let lower = 1.0 / nl.b - params.gamma / cfg.q;
    let base = cfg.t_end / cfg.steps as f64;

    let mut times = vec![0.0];
    let mut states = vec![u0.values().to_vec()];
    let mut windows = Vec::new();
    let mut t = 0.0;
    let mut u = u0.values().to_vec();
    let mut detected = false;
    let end_tol = 1e-12 * cfg.t_end;
    while t < cfg.t_end - end_tol {
        if windows.len() >= cfg.max_windows {
            return Err(Error::NonConvergence(format!(
                "window budget {} exhausted at t = {t}",
                cfg.max_windows
            )));
        }
        let sup = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut h = base.min(cfg.t_end - t);
        if sup > 0.0 {
            h = h.min(1.0 / (2f64.powf(nl.b + 1.0) * sup.powf(nl.b)));
        }
        if let Some(c) = &cfg.constants {
            let norm = lp_norm_values(&u, plan.physical_grid(), &params, cfg.q, params.k);
            if let Ok(te) = existence_time(norm, c, &nl, cfg.q, params.gamma) {
                h = h.min(te);
            }
        }
        let mut halvings = 0;
        let (path, iterations, residual) = loop {
            let window = PicardWindow::new(plan, &u, h, cfg.substeps, nl)?;
            match solve_window(&window, cfg, plan) {
                Ok(r) => break r,
                Err(Error::NonConvergence(_)) | Err(Error::NonFinite(_)) if halvings < cfg.max_halvings => {
                    halvings += 1;
                    h *= 0.5;
                }
                Err(Error::NonConvergence(m)) | Err(Error::NonFinite(m)) => {
                    return Err(Error::NonConvergence(format!(
                        "window at t = {t} failed after {halvings} halvings: {m}"
                    )))
                }
                Err(e) => return Err(e),
            }
        };
        windows.push(WindowStats { start: t, length: h, iterations, residual, halvings });
        let d = h / cfg.substeps as f64;
        let last = path.len() - 1;
        for (j, s) in path.into_iter().enumerate().skip(1) {
            // land exactly on the window end
            let tj = if j == last { t + h } else { t + j as f64 * d };
            times.push(tj);
            states.push(s);
        }
        t += h;
        u = states.last().expect("nonempty").clone();
        let norm = lp_norm_values(&u, plan.physical_grid(), &params, cfg.q, params.k);
        if !norm.is_finite() || norm > cfg.blowup_threshold {
            detected = true;
            break;
        }
    }
    let states = states
        .into_iter()
        .map(|v| plan.physical_from(v))
        .collect::<Result<Vec<_>>>()?;
    let trajectory = Trajectory::new(times, states, cfg.q, cfg.triplet)?;
    let blowup = if detected {
        match blowup_fit(&trajectory.times, &trajectory.norms_q, lower) {
            Ok(r) => r,
            Err(Error::InsufficientData(_)) => BlowupReport { detected: true, ..BlowupReport::none(lower) },
            Err(e) => return Err(e),
        }
    } else {
        BlowupReport::none(lower)
    };
    Ok(Solution { trajectory, blowup, windows })
}

/// Largest T with (2C₁)^b C₂ T^{1−bγ/q} ‖u₀‖^b = 1/2.
pub fn existence_time(u0_norm: f64, constants: &ContractionConstants, nl: &NonlinearitySpec, q: f64, gamma: f64) -> Result<f64> {
    let b = nl.b;
    let expo = 1.0 - b * gamma / q;
    if !(expo > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "q = {q} is not above the critical exponent {}; existence time is not given by the smallness condition",
            b * gamma
        )));
    }
    if !(u0_norm >= 0.0) || !(constants.c1 > 0.0 && constants.c2 > 0.0) {
        return Err(Error::InvalidParameter("norm must be >= 0 and constants positive".into()));
    }
    if u0_norm == 0.0 {
        return Ok(f64::INFINITY);
    }
    let ln = -b * (2.0 * constants.c1).ln() - (2.0 * constants.c2).ln() - b * u0_norm.ln();
    Ok((ln / expo).exp())
}

/// Sampling used by [`measure_contraction_constants`].
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionProbe {
    /// C1 sample times are {0} ∪ geomspace(first_time, horizon, samples)
    pub first_time: f64,
    pub horizon: f64,
    pub samples: usize,
    /// C2 window length and its number of substeps
    pub window: f64,
    pub window_steps: usize,
    pub nonlinearity: NonlinearitySpec,
}

/// C1 = max ‖S(·)ψ‖_X / ‖ψ‖_q and C2 = max ‖𝔾(F(Sψ))‖_X / (T^{1−bγ/q}‖Sψ‖_X^{b+1}) over the probes.
pub fn measure_contraction_constants(
    triplet: &Triplet,
    plan: &TransformPlan,
    probes: &[GridFunction],
    probe: &ContractionProbe,
) -> Result<ContractionConstants> {
    if probes.is_empty() {
        return Err(Error::InvalidParameter("probe set is empty".into()));
    }
    if triplet.kind == crate::model_core::TripletKind::Neither {
        return Err(Error::InvalidParameter("triplet is neither admissible nor generalized".into()));
    }
    if !(probe.first_time > 0.0 && probe.horizon > probe.first_time && probe.samples >= 2) {
        return Err(Error::InvalidParameter("C1 sampling needs 0 < first_time < horizon and samples >= 2".into()));
    }
    let params = *plan.params();
    let (grid, k) = (plan.physical_grid(), params.k);
    let mut c1_times = vec![0.0];
    c1_times.extend(geomspace(probe.first_time, probe.horizon, probe.samples));
    let b = probe.nonlinearity.b;
    let tpow = probe.window.powf(1.0 - b * params.gamma / triplet.q);
    let mut out = ContractionConstants { c1: 0.0, c2: 0.0, c1_probe: 0, c2_probe: 0 };
    for (i, psi) in probes.iter().enumerate() {
        plan.check_physical(psi)?;
        let nq = lp_norm_values(psi.values(), grid, &params, triplet.q, k);
        if nq == 0.0 {
            return Err(Error::InvalidParameter(format!("probe {i} is zero")));
        }
        let ph = plan.forward_values(psi.values());
        let tb = params.two_minus_beta();
        let flow: Vec<Vec<f64>> = c1_times
            .par_iter()
            .map(|&t| {
                let damped: Vec<f64> =
                    plan.spectral_grid().nodes().iter().zip(&ph).map(|(r, v)| v * (-r.powf(tb) * t).exp()).collect();
                plan.inverse_values(&damped)
            })
            .collect();
        let flow = {
            let mut f = flow;
            f[0] = psi.values().to_vec();
            f
        };
        let c1 = x_norm_values(&c1_times, &flow, grid, &params, triplet) / nq;
        if c1 > out.c1 {
            out.c1 = c1;
            out.c1_probe = i;
        }
        let window = PicardWindow::new(plan, psi.values(), probe.window, probe.window_steps, probe.nonlinearity)?;
        let wt = window.times();
        let lin = window.linear();
        let g = window.duhamel_part(lin)?;
        let xu = x_norm_values(&wt, lin, grid, &params, triplet);
        let c2 = x_norm_values(&wt, &g, grid, &params, triplet) / (tpow * xu.powf(b + 1.0));
        if c2 > out.c2 {
            out.c2 = c2;
            out.c2_probe = i;
        }
    }
    if !(out.c1 > 0.0 && out.c2 > 0.0 && out.c1.is_finite() && out.c2.is_finite()) {
        return Err(Error::NonFinite(format!("measured constants C1 = {}, C2 = {}", out.c1, out.c2)));
    }
    Ok(out)
}

/// X-norms of successive Picard differences ‖u^{j+1}−u^j‖_X on one window, j = 0..iterations.
pub fn picard_differences(
    u0: &GridFunction,
    length: f64,
    substeps: usize,
    nl: NonlinearitySpec,
    triplet: &Triplet,
    plan: &TransformPlan,
    iterations: usize,
) -> Result<Vec<f64>> {
    plan.check_physical(u0)?;
    let params = *plan.params();
    let window = PicardWindow::new(plan, u0.values(), length, substeps, nl)?;
    let times = window.times();
    let mut u = window.linear().to_vec();
    let mut diffs = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let new = window.apply(&u)?;
        let d: Vec<Vec<f64>> =
            new.iter().zip(&u).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect()).collect();
        diffs.push(x_norm_values(&times, &d, plan.physical_grid(), &params, triplet));
        u = new;
    }
    Ok(diffs)
}

/// Fits log v = log C + e·(−log(T*−t)) over the last decade of growth, jointly in (T*, e, C).
pub fn blowup_fit(times: &[f64], values: &[f64], lower_bound_exponent: f64) -> Result<BlowupReport> {
    if times.len() != values.len() {
        return Err(Error::InvalidParameter("times and values differ in length".into()));
    }
    if times.len() < 8 {
        return Err(Error::InsufficientData(format!("{} samples, need at least 8", times.len())));
    }
    if values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("values must be positive and times increasing".into()));
    }
    let last = *values.last().expect("nonempty");
    if last < 1e3 * values[0] {
        return Err(Error::InsufficientData(format!(
            "growth factor {:.3e} below 1e3; no blow-up signature",
            last / values[0]
        )));
    }
    let start = values.iter().rposition(|v| *v < last / 10.0).map_or(0, |i| i + 1);
    let tt = &times[start..];
    let lv: Vec<f64> = values[start..].iter().map(|v| v.ln()).collect();
    if tt.len() < 4 {
        return Err(Error::InsufficientData(format!("{} samples in the last decade, need 4", tt.len())));
    }
    let t_last = *tt.last().expect("nonempty");
    let span = (t_last - tt[0]).max(f64::MIN_POSITIVE);

    // inner linear fit for fixed g = ln(T* − t_last)
    let inner = |g: f64| -> (f64, f64, f64) {
        let ts = t_last + g.exp();
        let xs: Vec<f64> = tt.iter().map(|t| -(ts - t).ln()).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = lv.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let sxy: f64 = xs.iter().zip(&lv).map(|(x, y)| (x - mx) * (y - my)).sum();
        let e = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        let c = my - e * mx;
        let sse = xs.iter().zip(&lv).map(|(x, y)| (c + e * x - y).powi(2)).sum();
        (sse, e, c)
    };
    let (lo, hi) = (span.ln() - 30.0, span.ln() + 3.0);
    let grid_pts = 400;
    let mut best = (f64::INFINITY, lo);
    for i in 0..=grid_pts {
        let g = lo + (hi - lo) * i as f64 / grid_pts as f64;
        let s = inner(g).0;
        if s < best.0 {
            best = (s, g);
        }
    }
    // golden section on the bracketing cell
    let cell = (hi - lo) / grid_pts as f64;
    let (mut a, mut b) = ((best.1 - cell).max(lo), (best.1 + cell).min(hi));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (b - phi * (b - a), a + phi * (b - a));
    let (mut f1, mut f2) = (inner(x1).0, inner(x2).0);
    for _ in 0..200 {
        if (b - a).abs() < 1e-13 {
            break;
        }
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = inner(x1).0;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = inner(x2).0;
        }
    }
    let mut g = 0.5 * (a + b);
    let (_, mut e, mut c) = inner(g);

    // Gauss-Newton polish on (c, e, g)
    let sse_of = |c: f64, e: f64, g: f64| -> f64 {
        let ts = t_last + g.exp();
        tt.iter().zip(&lv).map(|(t, y)| (c - e * (ts - t).ln() - y).powi(2)).sum()
    };
    let mut cur = sse_of(c, e, g);
    for _ in 0..50 {
        let ts = t_last + g.exp();
        let mut jtj = Matrix3::<f64>::zeros();
        let mut jtr = Vector3::<f64>::zeros();
        for (t, y) in tt.iter().zip(&lv) {
            let dt = ts - t;
            let jrow = Vector3::new(1.0, -dt.ln(), -e * g.exp() / dt);
            let res = c - e * dt.ln() - y;
            jtj += jrow * jrow.transpose();
            jtr += jrow * res;
        }
        let Some(step) = jtj.lu().solve(&(-jtr)) else { break };
        let (nc, ne, ng) = (c + step[0], e + step[1], g + step[2]);
        let next = sse_of(nc, ne, ng);
        if !(next < cur) {
            break;
        }
        let done = cur - next <= 1e-30 + 1e-15 * cur;
        c = nc;
        e = ne;
        g = ng;
        cur = next;
        if done {
            break;
        }
    }
    let t_star = t_last + g.exp();
    Ok(BlowupReport {
        detected: true,
        t_star_fit: Some(t_star),
        exponent_fit: Some(e),
        prefactor_fit: Some(c.exp()),
        lower_bound_exponent,
        fit_samples: tt.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hankel::GridSizing;
    use crate::kernels::GaussianFamily;
    use crate::model_core::{derive_params, Sign};
    use crate::radial_numerics::lp_norm_deta;
    use approx::assert_relative_eq;

    fn heat_plan() -> TransformPlan {
        let p = derive_params(3, 0.0, 0).unwrap();
        TransformPlan::for_scales(p, 0.25, 3.0, &GridSizing::default()).unwrap()
    }

    #[test]
    fn heat_semigroup_closed_form() {
        let plan = heat_plan();
        // e^{−r²/(4s)} is the family member with scale s when β = 0
        let a = plan.physical_fn(|r| (-r * r / 4.0).exp()).unwrap();
        let s1 = semigroup_apply(&a, 1.0, &plan).unwrap();
        let want = plan.physical_fn(|r| 0.5f64.powf(1.5) * (-r * r / 8.0).exp()).unwrap();
        let err = lp_norm_deta(&s1.axpy(-1.0, &want).unwrap(), 2.0, 0).unwrap() / lp_norm_deta(&want, 2.0, 0).unwrap();
        assert!(err < 1e-6, "{err}");
        assert_eq!(semigroup_apply(&a, 0.0, &plan).unwrap().values(), a.values());
        assert!(semigroup_apply(&a, -1.0, &plan).is_err());
    }

    #[test]
    fn kernel_route_matches_spectral_route() {
        let p = derive_params(3, 1.0, 0).unwrap();
        let plan = TransformPlan::for_scales(p, 0.5, 2.5, &GridSizing::default()).unwrap();
        let fam = GaussianFamily::new(0.5, 1.0);
        let a = plan.physical_fn(|r| fam.physical(r, &p)).unwrap();
        let spec = semigroup_apply(&a, 1.0, &plan).unwrap();
        let quad = semigroup_apply_kernel(&a, 1.0).unwrap();
        let err = lp_norm_deta(&spec.axpy(-1.0, &quad).unwrap(), 2.0, 0).unwrap() / lp_norm_deta(&spec, 2.0, 0).unwrap();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn duhamel_constant_forcing_second_order() {
        let p = derive_params(3, 1.0, 0).unwrap();
        let plan = TransformPlan::for_scales(p, 0.5, 2.5, &GridSizing::default()).unwrap();
        let fam = GaussianFamily::new(0.5, 1.0);
        let f = plan.physical_fn(|r| fam.physical(r, &p)).unwrap();
        let t = 2.0;
        let fh = hankel_forward(&f, &plan).unwrap();
        let exact: Vec<f64> = plan
            .spectral_grid()
            .nodes()
            .iter()
            .zip(fh.values())
            .map(|(rho, v)| {
                let l = rho.powf(p.two_minus_beta());
                -(-l * t).exp_m1() / l * v
            })
            .collect();
        let exact = plan.physical_from(plan.inverse_values(&exact)).unwrap();
        let traj = Trajectory::constant(&f, t, 1, 2.0).unwrap();
        let err = |steps| {
            let g = duhamel(&traj, t, &plan, steps).unwrap();
            lp_norm_deta(&g.axpy(-1.0, &exact).unwrap(), 2.0, 0).unwrap() / lp_norm_deta(&exact, 2.0, 0).unwrap()
        };
        let (e1, e2) = (err(16), err(32));
        assert!(e2 < 1e-3 && (e1 / e2).log2() > 1.8, "{e1} {e2}");
        let zero = Trajectory::constant(&plan.physical_zeros(), t, 1, 2.0).unwrap();
        assert!(duhamel(&zero, t, &plan, 8).unwrap().values().iter().all(|v| *v == 0.0));
        assert!(duhamel(&traj, 2.5, &plan, 8).is_err());
    }

    #[test]
    fn existence_time_examples() {
        let p = derive_params(3, 1.0, 0).unwrap();
        let nl = NonlinearitySpec::new(1.0, Sign::Focusing, &p).unwrap();
        let c = ContractionConstants { c1: 1.0, c2: 1.0, c1_probe: 0, c2_probe: 0 };
        // γ = 2, q = 4 gives γ/q = 1/2
        assert_relative_eq!(existence_time(1.0, &c, &nl, 4.0, 2.0).unwrap(), 1.0 / 16.0, max_relative = 1e-14);
        assert_eq!(existence_time(0.0, &c, &nl, 4.0, 2.0).unwrap(), f64::INFINITY);
        assert!(existence_time(1e-3, &c, &nl, 4.0, 2.0).unwrap() > existence_time(1e-2, &c, &nl, 4.0, 2.0).unwrap());
        assert!(existence_time(1.0, &c, &nl, nl.q0, 2.0).is_err());
    }

    #[test]
    fn zero_data_stays_zero() {
        let plan = heat_plan();
        let nl = NonlinearitySpec::new(1.0, Sign::Focusing, plan.params()).unwrap();
        let cfg = EvolutionConfig::new(1.0, 4, nl, 2.0);
        let sol = picard_solve(&plan.physical_zeros(), &cfg, &plan).unwrap();
        assert!(sol.trajectory.states.iter().all(|s| s.values().iter().all(|v| *v == 0.0)));
        assert!(!sol.blowup.detected);
        assert_relative_eq!(sol.trajectory.final_time(), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn blowup_fit_synthetic() {
        let times: Vec<f64> = (0..200).map(|i| 1.0 - 10f64.powf(-4.0 * i as f64 / 199.0)).collect();
        let values: Vec<f64> = times.iter().map(|t| (1.0 - t).powi(-2)).collect();
        let r = blowup_fit(&times, &values, 1.5).unwrap();
        assert!((r.exponent_fit.unwrap() - 2.0).abs() < 1e-6);
        assert!((r.t_star_fit.unwrap() - 1.0).abs() < 1e-8);
        let flat = vec![1.0; 20];
        let tt: Vec<f64> = (0..20).map(|i| i as f64).collect();
        assert!(matches!(blowup_fit(&tt, &flat, 1.0), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn trajectory_csv_and_interpolation() {
        let plan = heat_plan();
        let a = plan.physical_fn(|r| (-r * r).exp()).unwrap();
        let b = a.scaled(3.0).unwrap();
        let tr = Trajectory::new(vec![0.0, 2.0], vec![a.clone(), b], 2.0, None).unwrap();
        let mid = tr.state_at(1.0).unwrap();
        assert_relative_eq!(mid[5], 2.0 * a.values()[5], max_relative = 1e-14);
        assert!(tr.state_at(2.5).is_err());
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("t,norm_q,norm_p_weighted\n"));
        assert_eq!(s.lines().count(), 3);
        assert!(Trajectory::new(vec![0.0, 0.0], vec![a.clone(), a], 2.0, None).is_err());
    }
}
