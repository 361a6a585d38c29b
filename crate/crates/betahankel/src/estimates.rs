//! Space-time norms, the smoothing constant, decay fits and Duhamel audits.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolution::{duhamel_path, Trajectory};
use crate::hankel::TransformPlan;
use crate::model_core::{ModelParams, NonlinearitySpec, Triplet, TripletKind};
use crate::radial_numerics::{lp_norm_values, weighted_power_integral, RadialGrid};
use crate::specfun;

/// (∫ v(t)^m dt)^{1/m} by the trapezoid rule; m = ∞ gives the max. Any m > 0.
pub(crate) fn time_norm(times: &[f64], vals: &[f64], m: f64) -> f64 {
    if m.is_infinite() {
        return vals.iter().fold(0.0, |a, v| a.max(*v));
    }
    let mut s = 0.0;
    for (t, v) in times.windows(2).zip(vals.windows(2)) {
        s += 0.5 * (t[1] - t[0]) * (v[0].powf(m) + v[1].powf(m));
    }
    s.powf(1.0 / m)
}

/// sup_t t^{1/m} v(t)
pub(crate) fn weighted_sup(times: &[f64], vals: &[f64], m: f64) -> f64 {
    times.iter().zip(vals).fold(0.0, |a, (t, v)| {
        let w = if m.is_infinite() { 1.0 } else { t.powf(1.0 / m) };
        a.max(w * v)
    })
}

/// ‖·‖_X: max_t‖·‖_q plus L^m_t L^p (admissible) or 𝒞_m L^p (generalized).
pub(crate) fn x_norm_values(
    times: &[f64],
    states: &[Vec<f64>],
    grid: &RadialGrid,
    params: &ModelParams,
    triplet: &Triplet,
) -> f64 {
    let k = params.k;
    let nq: Vec<f64> = states.iter().map(|s| lp_norm_values(s, grid, params, triplet.q, k)).collect();
    let np: Vec<f64> = states.iter().map(|s| lp_norm_values(s, grid, params, triplet.p, k)).collect();
    let sup_q = nq.iter().fold(0.0f64, |a, v| a.max(*v));
    let second = match triplet.kind {
        TripletKind::Generalized => weighted_sup(times, &np, triplet.m),
        _ => time_norm(times, &np, triplet.m),
    };
    sup_q + second
}

fn check_time_exponent(m: f64) -> Result<()> {
    if m.is_nan() || m < 1.0 {
        return Err(Error::InvalidParameter(format!("time exponent m = {m} must lie in [1, inf]")));
    }
    Ok(())
}

fn spatial_norms(traj: &Trajectory, p: f64, k: u32) -> Result<Vec<f64>> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidParameter(format!("space exponent p = {p} must be >= 1")));
    }
    Ok(traj.states.iter().map(|s| lp_norm_values(s.values(), s.grid(), s.params(), p, k)).collect())
}

/// ‖u/r^k‖ in L^m(I; L^p_{dη}), trapezoid in time over the trajectory's own grid.
pub fn spacetime_norm(traj: &Trajectory, m: f64, p: f64, k: u32) -> Result<f64> {
    if traj.is_empty() {
        return Err(Error::InvalidParameter("empty trajectory".into()));
    }
    check_time_exponent(m)?;
    Ok(time_norm(&traj.times, &spatial_norms(traj, p, k)?, m))
}

/// sup_t t^{1/m}‖u(t)/r^k‖ in L^p_{dη}.
pub fn cm_norm(traj: &Trajectory, m: f64, p: f64, k: u32) -> Result<f64> {
    if traj.is_empty() {
        return Err(Error::InvalidParameter("empty trajectory".into()));
    }
    check_time_exponent(m)?;
    Ok(weighted_sup(&traj.times, &spatial_norms(traj, p, k)?, m))
}

/// C(β,μ,p,q) = [(2−β)^{2μ+1}Γ(μ+1)]^{1/p−1/q} m^{−γ/m}, 1 + 1/p = 1/m + 1/q.
pub fn smoothing_constant(p: f64, q: f64, params: &ModelParams) -> Result<f64> {
    if q.is_nan() || p.is_nan() || q < 1.0 {
        return Err(Error::InvalidParameter(format!("need 1 <= q <= p, got p = {p}, q = {q}")));
    }
    if p < q {
        return Err(Error::InvalidParameter(format!("need p >= q, got p = {p}, q = {q}")));
    }
    if p == q {
        return Ok(1.0);
    }
    let d = 1.0 / p - 1.0 / q;
    let inv_m = 1.0 + d;
    let tb = params.two_minus_beta();
    let mu = params.mu;
    let mut ln = d * ((2.0 * mu + 1.0) * tb.ln() + specfun::ln_gamma(mu + 1.0)?);
    if inv_m > 0.0 {
        // m^{−γ/m} = exp(γ (1/m) ln(1/m))
        ln += params.gamma * inv_m * inv_m.ln();
    }
    Ok(ln.exp())
}

/// Least-squares slope of log(value) against log(t).
pub fn decay_exponent_fit(times: &[f64], values: &[f64]) -> Result<f64> {
    if times.len() != values.len() {
        return Err(Error::InvalidParameter("times and values differ in length".into()));
    }
    if times.len() < 5 {
        return Err(Error::InsufficientData(format!("{} samples, need at least 5", times.len())));
    }
    if times.iter().chain(values).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter("times and values must be positive and finite".into()));
    }
    let xs: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InsufficientData("all sample times coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormReport {
    pub triplet: Triplet,
    pub value_lm_lp: f64,
    pub value_linf_lq: f64,
    pub value_cm: f64,
    /// log-log slope of ‖u(t)/r^k‖_p over t > 0, when it can be fitted
    pub fitted_exponent: Option<f64>,
}

/// All norms of one trajectory for one triplet.
pub fn norm_report(traj: &Trajectory, triplet: &Triplet, k: u32) -> Result<NormReport> {
    let np = spatial_norms(traj, triplet.p, k)?;
    let (ts, vs): (Vec<f64>, Vec<f64>) =
        traj.times.iter().zip(&np).filter(|(t, v)| **t > 0.0 && **v > 0.0).map(|(t, v)| (*t, *v)).unzip();
    Ok(NormReport {
        triplet: *triplet,
        value_lm_lp: spacetime_norm(traj, triplet.m, triplet.p, k)?,
        value_linf_lq: spacetime_norm(traj, f64::INFINITY, triplet.q, k)?,
        value_cm: cm_norm(traj, triplet.m, triplet.p, k)?,
        fitted_exponent: decay_exponent_fit(&ts, &vs).ok(),
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

/// One CSV row per (triplet, probe) report.
pub fn write_norm_reports<W: Write>(rows: &[(String, NormReport)], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["probe", "m", "p", "q", "kind", "value_lm_lp", "value_linf_lq", "value_cm", "fitted_exponent"])?;
    for (probe, r) in rows {
        wr.write_record([
            probe.clone(),
            format!("{}", r.triplet.m),
            format!("{}", r.triplet.p),
            format!("{}", r.triplet.q),
            r.triplet.kind.as_str().to_string(),
            format!("{:.16e}", r.value_lm_lp),
            format!("{:.16e}", r.value_linf_lq),
            format!("{:.16e}", r.value_cm),
            fmt_opt(r.fitted_exponent),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditBranch {
    /// p ≤ q(b+1): right side in L^{m/(b+1)}(L^{p/(b+1)})
    Direct,
    /// p > q(b+1): interpolated right side with exponent θ
    Interpolated,
}

/// Both sides of the Duhamel estimates for one forcing trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DuhamelAudit {
    pub branch: AuditBranch,
    pub theta: Option<f64>,
    /// norms of 𝔾f
    pub lhs: NormReport,
    /// T^{1−bγ/q} times the Lebesgue-in-time forcing norm
    pub rhs: f64,
    /// T^{1−bγ/q} times the 𝒞-in-time forcing norm
    pub rhs_cm: f64,
    pub ratio_linf_lq: f64,
    pub ratio_lm_lp: f64,
    pub ratio_cm: f64,
}

fn ratio(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a / b
    }
}

/// Evaluates 𝔾f on the forcing's time grid and both sides of the Duhamel estimates.
pub fn duhamel_estimate_audit(
    traj_f: &Trajectory,
    triplet: &Triplet,
    nl: &NonlinearitySpec,
    plan: &TransformPlan,
) -> Result<DuhamelAudit> {
    let b = nl.b;
    let (m, p, q) = (triplet.m, triplet.p, triplet.q);
    if triplet.kind == TripletKind::Neither {
        return Err(Error::InvalidParameter("triplet is neither admissible nor generalized".into()));
    }
    if !(p > b + 1.0) {
        return Err(Error::InvalidParameter(format!("need p > b + 1, got p = {p}, b = {b}")));
    }
    let params = *plan.params();
    let k = params.k;
    let grid = plan.physical_grid().clone();
    let times = &traj_f.times;
    let t_end = traj_f.final_time();
    let tpow = t_end.powf(1.0 - b * params.gamma / q);

    let g = duhamel_path(traj_f, plan)?;
    let gtraj = Trajectory::new(times.clone(), g, q, Some(*triplet))?;
    let lhs = norm_report(&gtraj, triplet, k)?;

    // ‖|f/r^k|^s‖_e = (∫|f/r^k|^{se} dη)^{1/e}
    let power_norms = |s: f64, e: f64| -> Vec<f64> {
        traj_f
            .states
            .iter()
            .map(|st| {
                if e.is_infinite() {
                    lp_norm_values(st.values(), &grid, &params, f64::INFINITY, k).powf(s)
                } else {
                    weighted_power_integral(st.values(), &grid, &params, k, s * e).powf(1.0 / e)
                }
            })
            .collect()
    };
    let s = 1.0 / (b + 1.0);
    let (branch, theta, rhs, rhs_cm) = if p <= q * (b + 1.0) {
        let inner = power_norms(1.0, p / (b + 1.0));
        let mb = m / (b + 1.0);
        (AuditBranch::Direct, None, tpow * time_norm(times, &inner, mb), tpow * weighted_sup(times, &inner, mb))
    } else {
        let theta = (p - q * (b + 1.0)) / ((b + 1.0) * (p - q));
        let a = time_norm(times, &power_norms(s, q), f64::INFINITY);
        let bp = power_norms(s, p);
        let (lm, cm) = (time_norm(times, &bp, m), weighted_sup(times, &bp, m));
        let f = |x: f64| tpow * a.powf(theta * (b + 1.0)) * x.powf((1.0 - theta) * (b + 1.0));
        (AuditBranch::Interpolated, Some(theta), f(lm), f(cm))
    };
    Ok(DuhamelAudit {
        branch,
        theta,
        lhs,
        rhs,
        rhs_cm,
        ratio_linf_lq: ratio(lhs.value_linf_lq, rhs),
        ratio_lm_lp: ratio(lhs.value_lm_lp, rhs),
        ratio_cm: ratio(lhs.value_cm, rhs_cm),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hankel::GridSizing;
    use crate::kernels::GaussianFamily;
    use crate::model_core::{classify_triplet, derive_params, Sign};
    use crate::radial_numerics::GridFunction;
    use approx::assert_relative_eq;

    fn plan() -> TransformPlan {
        let p = derive_params(3, 1.0, 0).unwrap();
        TransformPlan::for_scales(p, 0.5, 3.0, &GridSizing::default()).unwrap()
    }

    fn separable(plan: &TransformPlan, times: &[f64], f: impl Fn(f64) -> f64) -> Trajectory {
        let p = *plan.params();
        let fam = GaussianFamily::new(0.5, 1.0);
        let g = plan.physical_fn(|r| fam.physical(r, &p)).unwrap();
        let states: Vec<GridFunction> = times.iter().map(|t| g.scaled(f(*t)).unwrap()).collect();
        Trajectory::new(times.to_vec(), states, 2.0, None).unwrap()
    }

    #[test]
    fn separable_spacetime_norm() {
        let plan = plan();
        let p = *plan.params();
        let times: Vec<f64> = (0..=2000).map(|i| i as f64 / 1000.0).collect();
        let tr = separable(&plan, &times, |t| (-t).exp());
        let gn = GaussianFamily::new(0.5, 1.0).lp_norm(3.0, &p);
        let m = 3.0;
        let want = ((1.0 - (-m * 2.0f64).exp()) / m).powf(1.0 / m) * gn;
        assert_relative_eq!(spacetime_norm(&tr, m, 3.0, 0).unwrap(), want, max_relative = 1e-6);
        assert_relative_eq!(spacetime_norm(&tr, f64::INFINITY, 3.0, 0).unwrap(), gn, max_relative = 1e-9);
        let zero = separable(&plan, &times, |_| 0.0);
        assert_eq!(spacetime_norm(&zero, 3.0, 3.0, 0).unwrap(), 0.0);
        assert_eq!(cm_norm(&zero, 3.0, 3.0, 0).unwrap(), 0.0);
    }

    #[test]
    fn cm_weight_cancels() {
        let plan = plan();
        let p = *plan.params();
        let times: Vec<f64> = (0..=50).map(|i| i as f64 / 10.0).collect();
        let tr = separable(&plan, &times, |t| if t > 0.0 { t.powf(-1.0 / 3.0) } else { 0.0 });
        let gn = GaussianFamily::new(0.5, 1.0).lp_norm(2.0, &p);
        assert_relative_eq!(cm_norm(&tr, 3.0, 2.0, 0).unwrap(), gn, max_relative = 1e-9);
    }

    #[test]
    fn smoothing_constant_examples() {
        let p = derive_params(3, 1.0, 0).unwrap();
        for &e in &[1.0, 2.0, 3.5, f64::INFINITY] {
            assert_eq!(smoothing_constant(e, e, &p).unwrap(), 1.0);
        }
        // μ = 1, β = 1: (2−β)^{2μ+1}Γ(μ+1) = 1, and 1/m = 0
        assert_relative_eq!(smoothing_constant(f64::INFINITY, 1.0, &p).unwrap(), 1.0, max_relative = 1e-15);
        // p = 2, q = 1: 1/m = 1/2, C = 1 · 2^{−γ/2} = 1/2
        assert_relative_eq!(smoothing_constant(2.0, 1.0, &p).unwrap(), 0.5, max_relative = 1e-14);
        assert!(smoothing_constant(1.0, 2.0, &p).is_err());
        let bounded: Vec<f64> = (0..=8).map(|k| smoothing_constant(4.0, 2.0, &p.with_k(k)).unwrap()).collect();
        assert!(bounded.iter().all(|c| c.is_finite() && *c > 0.0 && *c <= 1.0));
    }

    #[test]
    fn decay_fit_examples() {
        let t: Vec<f64> = (1..=20).map(|i| i as f64 * 0.5).collect();
        let v: Vec<f64> = t.iter().map(|x| 3.0 * x.powf(0.75)).collect();
        assert_relative_eq!(decay_exponent_fit(&t, &v).unwrap(), 0.75, epsilon = 1e-12);
        let c = vec![2.0; 20];
        assert!(decay_exponent_fit(&t, &c).unwrap().abs() < 1e-14);
        let mut bad = v.clone();
        bad[3] = 0.0;
        assert!(decay_exponent_fit(&t, &bad).is_err());
        assert!(decay_exponent_fit(&t[..4], &v[..4]).is_err());
    }

    #[test]
    fn audit_zero_forcing_and_branches() {
        let plan = plan();
        let pm = *plan.params();
        let nl = NonlinearitySpec::new(1.0, Sign::Focusing, &pm).unwrap();
        let times: Vec<f64> = (0..=16).map(|i| i as f64 / 16.0).collect();
        let zero = separable(&plan, &times, |_| 0.0);
        let tri = classify_triplet(3.0, 3.0, 2.0, &pm).unwrap();
        let a = duhamel_estimate_audit(&zero, &tri, &nl, &plan).unwrap();
        assert_eq!(a.lhs.value_linf_lq, 0.0);
        assert_eq!(a.rhs, 0.0);
        assert_eq!(a.branch, AuditBranch::Direct);
        let f = separable(&plan, &times, |t| (-t).exp());
        let a = duhamel_estimate_audit(&f, &tri, &nl, &plan).unwrap();
        assert!(a.ratio_linf_lq > 0.0 && a.ratio_linf_lq.is_finite());
        let low = classify_triplet(3.0, 1.5, 1.2, &pm);
        if let Ok(t) = low {
            assert!(duhamel_estimate_audit(&f, &t, &nl, &plan).is_err());
        }
    }
}
