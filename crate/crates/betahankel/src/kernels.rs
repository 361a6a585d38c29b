//! Evolution kernels, the Delsarte kernel and the ♯-convolution.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hankel::{hankel_forward, TransformPlan};
use crate::model_core::ModelParams;
use crate::quadrature::{self, Rule};
use crate::radial_numerics::{lp_norm_deta, GridFunction};
use crate::specfun;

/// Members A·r^k exp(−r^{2−β}/((2−β)²s)) of the family closed under the transform,
/// the semigroup and ♯.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianFamily {
    pub scale: f64,
    pub amplitude: f64,
}

impl GaussianFamily {
    pub fn new(scale: f64, amplitude: f64) -> Self {
        GaussianFamily { scale, amplitude }
    }

    /// The kernel K_μ(·, t) as a family member.
    pub fn kernel(t: f64, params: &ModelParams) -> Self {
        let ln_a = -(params.mu + 1.0) * (params.two_minus_beta() * t).ln();
        GaussianFamily { scale: t, amplitude: ln_a.exp() }
    }

    pub fn physical(&self, r: f64, params: &ModelParams) -> f64 {
        let tb = params.two_minus_beta();
        let e = -r.powf(tb) / (tb * tb * self.scale);
        self.amplitude * r.powi(params.k as i32) * e.exp()
    }

    /// A((2−β)s)^{μ+1} ρ^{k−β} exp(−ρ^{2−β}s)
    pub fn spectral(&self, rho: f64, params: &ModelParams) -> f64 {
        let tb = params.two_minus_beta();
        let ln = (params.mu + 1.0) * (tb * self.scale).ln() + (params.k as f64 - params.beta) * rho.ln()
            - rho.powf(tb) * self.scale;
        self.amplitude * ln.exp()
    }

    /// S(t) applied to this member.
    pub fn evolved(&self, t: f64, params: &ModelParams) -> Self {
        let ratio = self.scale / (self.scale + t);
        GaussianFamily { scale: self.scale + t, amplitude: self.amplitude * ratio.powf(params.mu + 1.0) }
    }

    /// self ♯ other.
    pub fn sharp(&self, other: &GaussianFamily, params: &ModelParams) -> Self {
        let tb = params.two_minus_beta();
        let e = params.mu + 1.0;
        let ln = e * ((tb * self.scale).ln() + (tb * other.scale).ln() - (tb * (self.scale + other.scale)).ln());
        GaussianFamily { scale: self.scale + other.scale, amplitude: self.amplitude * other.amplitude * ln.exp() }
    }

    /// ‖f/r^k‖ in L^p(r^{2k+n−1−β} dr), in closed form.
    pub fn lp_norm(&self, p: f64, params: &ModelParams) -> f64 {
        let a = self.amplitude.abs();
        if p.is_infinite() {
            return a;
        }
        // ∫ e^{−p r^{2−β}/((2−β)²s)} r^{2k+n−1−β} dr with u = r^{2−β}
        let tb = params.two_minus_beta();
        let nu = (params.eta_exponent(params.k) + 1.0) / tb;
        let ln_i = specfun::ln_gamma(nu).expect("nu > 0") - tb.ln() + nu * (tb * tb * self.scale / p).ln();
        a * (ln_i / p).exp()
    }
}

/// Time-fixed evaluator for the two evolution kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelEval {
    pub params: ModelParams,
    pub t: f64,
}

impl KernelEval {
    pub fn new(params: ModelParams, t: f64) -> Result<Self> {
        check_time(t)?;
        Ok(KernelEval { params, t })
    }
    pub fn k(&self, r: f64) -> Result<f64> {
        kernel_k(r, self.t, &self.params)
    }
    pub fn semigroup(&self, rho: f64, r: f64) -> Result<f64> {
        semigroup_kernel(rho, r, self.t, &self.params)
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("kernel time t = {t} must be positive")));
    }
    Ok(())
}

/// K_μ(r,t) = ((2−β)t)^{−μ−1} exp(−r^{2−β}/((2−β)²t)) r^k
pub fn kernel_k(r: f64, t: f64, params: &ModelParams) -> Result<f64> {
    check_time(t)?;
    if !(r >= 0.0) {
        return Err(Error::InvalidParameter(format!("radius r = {r} must be >= 0")));
    }
    let tb = params.two_minus_beta();
    let mut ln = -(params.mu + 1.0) * (tb * t).ln() - r.powf(tb) / (tb * tb * t);
    if params.k > 0 {
        if r == 0.0 {
            return Ok(0.0);
        }
        ln += params.k as f64 * r.ln();
    }
    Ok(ln.exp())
}

/// K̃(ρ,r,t) = r^{−λ}ρ^{−λ−β}/((2−β)t) exp(−(r^{2−β}+ρ^{2−β})/((2−β)²t)) I_μ(2(rρ)^{(2−β)/2}/((2−β)²t)),
/// the kernel of S(t)a(r) = ∫ K̃(ρ,r,t) a(ρ) ρ^{n−1} dρ.
pub fn semigroup_kernel(rho: f64, r: f64, t: f64, params: &ModelParams) -> Result<f64> {
    check_time(t)?;
    if !(r > 0.0 && rho > 0.0) {
        return Err(Error::InvalidParameter(format!("radii must be positive (r = {r}, rho = {rho})")));
    }
    let tb = params.two_minus_beta();
    let a = params.half_power();
    let (ra, pa) = (r.powf(a), rho.powf(a));
    let denom = tb * tb * t;
    let z = 2.0 * ra * pa / denom;
    let ive = specfun::bessel_i_scaled(params.mu, z)?;
    if ive == 0.0 {
        return Ok(0.0);
    }
    // −(r^{2−β}+ρ^{2−β})/((2−β)²t) + z = −(r^a − ρ^a)²/((2−β)²t)
    let ln = -params.lambda * r.ln() - (params.lambda + params.beta) * rho.ln() - (tb * t).ln()
        - (ra - pa) * (ra - pa) / denom
        + ive.ln();
    Ok(ln.exp())
}

/// Value of D together with a flag for inputs within 1e-12 of a degenerate triangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DelsarteValue {
    pub value: f64,
    pub near_degenerate: bool,
}

const DEGENERACY_TOL: f64 = 1e-12;

fn stretched(x: f64, params: &ModelParams) -> f64 {
    params.stretch() * x.powf(params.half_power())
}

/// Heron's area with sides sorted descending (Kahan's arrangement).
fn heron_sorted(mut s: [f64; 3]) -> f64 {
    s.sort_by(|a, b| b.total_cmp(a));
    let [a, b, c] = s;
    let prod = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c));
    0.25 * prod.max(0.0).sqrt()
}

/// ln of D/Δ^{2μ−1}: c x^{−λ}(yz)^{−λ−β} 2^{μ−1} / ((XYZ)^μ Γ(μ+½) √π)
fn delsarte_smooth_ln(x: f64, y: f64, z: f64, xs: f64, ys: f64, zs: f64, params: &ModelParams) -> f64 {
    let mu = params.mu;
    params.stretch().ln() - params.lambda * x.ln() - (params.lambda + params.beta) * (y.ln() + z.ln())
        + (mu - 1.0) * std::f64::consts::LN_2
        - mu * (xs.ln() + ys.ln() + zs.ln())
        - specfun::ln_gamma(mu + 0.5).expect("mu > -1/2")
        - 0.5 * PI.ln()
}

/// Closed-form Delsarte kernel D(x,y,z); zero when the stretched radii form no triangle.
pub fn delsarte_d(x: f64, y: f64, z: f64, params: &ModelParams) -> Result<DelsarteValue> {
    if !(x > 0.0 && y > 0.0 && z > 0.0) {
        return Err(Error::InvalidParameter(format!("Delsarte kernel needs positive radii ({x}, {y}, {z})")));
    }
    let (xs, ys, zs) = (stretched(x, params), stretched(y, params), stretched(z, params));
    let mut s = [xs, ys, zs];
    s.sort_by(|a, b| b.total_cmp(a));
    let slack = (s[1] + s[2] - s[0]) / s[0];
    if slack < -DEGENERACY_TOL {
        return Ok(DelsarteValue { value: 0.0, near_degenerate: false });
    }
    if slack <= DEGENERACY_TOL {
        return Ok(DelsarteValue { value: 0.0, near_degenerate: true });
    }
    let area = heron_sorted(s);
    let ln = delsarte_smooth_ln(x, y, z, xs, ys, zs, params) + (2.0 * params.mu - 1.0) * area.ln();
    Ok(DelsarteValue { value: ln.exp(), near_degenerate: false })
}

/// f ♯ g = H⁻¹(η^{β−k} Hf Hg)
pub fn sharp_convolve(f: &GridFunction, g: &GridFunction, plan: &TransformPlan) -> Result<GridFunction> {
    let hf = hankel_forward(f, plan)?;
    let hg = hankel_forward(g, plan)?;
    let alpha = plan.params().alpha;
    let prod: Vec<f64> = plan
        .spectral_grid()
        .nodes()
        .iter()
        .zip(hf.values().iter().zip(hg.values()))
        .map(|(eta, (a, b))| eta.powf(alpha) * (a * b))
        .collect();
    plan.physical_from(plan.inverse_values(&prod))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct YoungAudit {
    pub lhs: f64,
    pub rhs: f64,
}

impl YoungAudit {
    pub fn holds(&self, rel_slack: f64) -> bool {
        self.lhs <= self.rhs * (1.0 + rel_slack)
    }
}

/// Both sides of ‖f♯g/r^k‖_a ≤ Γ(μ+1)^{−1}(2−β)^{−μ} ‖f/r^k‖_b ‖g/r^k‖_c, 1 + 1/a = 1/b + 1/c.
pub fn young_audit(f: &GridFunction, g: &GridFunction, a: f64, b: f64, c: f64, plan: &TransformPlan) -> Result<YoungAudit> {
    if [a, b, c].iter().any(|e| e.is_nan() || *e < 1.0) {
        return Err(Error::InvalidParameter(format!("exponents ({a}, {b}, {c}) must be >= 1")));
    }
    let lhs_rel = 1.0 + 1.0 / a;
    let rhs_rel = 1.0 / b + 1.0 / c;
    if (lhs_rel - rhs_rel).abs() > 1e-12 * lhs_rel {
        return Err(Error::InvalidParameter(format!("1 + 1/a = 1/b + 1/c violated for ({a}, {b}, {c})")));
    }
    let params = plan.params();
    let k = params.k;
    let conv = sharp_convolve(f, g, plan)?;
    let lhs = lp_norm_deta(&conv, a, k)?;
    let rhs = params.young_constant().abs() * lp_norm_deta(f, b, k)? * lp_norm_deta(g, c, k)?;
    Ok(YoungAudit { lhs, rhs })
}

/// Direct quadratures built on the closed-form D, independent of the transform matrices.
pub mod oracle {
    use super::*;

    /// Which variable of D is integrated out.
    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub enum Free {
        X,
        Y,
        Z,
    }

    fn rule(params: &ModelParams, nodes: usize) -> Result<Rule> {
        quadrature::gauss_gegenbauer(nodes, params.mu - 0.5)
    }

    /// ∫ h(v) D(·) v^{n−1} dv over the free radius v, the other two radii fixed.
    ///
    /// The free stretched side V runs over [|S1−S2|, S1+S2]; with V = M + Ht the Heron
    /// factor is (1−t²)^{μ−½} [H²(B+V)(V+A)/16]^{μ−½}, and the first part is the weight
    /// of the Gauss rule.
    pub(crate) fn integrate_free<H: Fn(f64) -> f64>(
        free: Free,
        u: f64,
        v: f64,
        params: &ModelParams,
        rule: &Rule,
        h: H,
    ) -> f64 {
        let c = params.stretch();
        let (s1, s2) = (stretched(u, params), stretched(v, params));
        let (a, b) = ((s1 - s2).abs(), s1 + s2);
        let (m, half) = (0.5 * (a + b), 0.5 * (b - a));
        if half <= 0.0 {
            return 0.0;
        }
        let nm1 = params.n as f64 - 1.0;
        let e = params.mu - 0.5;
        let mut total = 0.0;
        for (t, w) in rule.nodes.iter().zip(&rule.weights) {
            let vs = m + half * t;
            let r = (vs / c).powf(c);
            let (x, y, z, xs, ys, zs) = match free {
                Free::X => (r, u, v, vs, s1, s2),
                Free::Y => (u, r, v, s1, vs, s2),
                Free::Z => (u, v, r, s1, s2, vs),
            };
            let heron_rest = e * (half * half * (b + vs) * (vs + a) / 16.0).ln();
            let jac = (c - 1.0) * (vs / c).ln() + half.ln();
            let ln = delsarte_smooth_ln(x, y, z, xs, ys, zs, params) + heron_rest + jac + nm1 * r.ln();
            total += w * h(r) * ln.exp();
        }
        total
    }

    /// ∫ x^{k−β} D(x,y,z) x^{n−1} dx
    pub fn identity_x(y: f64, z: f64, params: &ModelParams, nodes: usize) -> Result<f64> {
        let e = params.k as f64 - params.beta;
        Ok(integrate_free(Free::X, y, z, params, &rule(params, nodes)?, |x| x.powf(e)))
    }

    /// ∫ y^k D(x,y,z) y^{n−1} dy
    pub fn identity_y(x: f64, z: f64, params: &ModelParams, nodes: usize) -> Result<f64> {
        let k = params.k as i32;
        Ok(integrate_free(Free::Y, x, z, params, &rule(params, nodes)?, |y| y.powi(k)))
    }

    /// ∫ z^k D(x,y,z) z^{n−1} dz
    pub fn identity_z(x: f64, y: f64, params: &ModelParams, nodes: usize) -> Result<f64> {
        let k = params.k as i32;
        Ok(integrate_free(Free::Z, x, y, params, &rule(params, nodes)?, |z| z.powi(k)))
    }

    /// f♯g(x) = ∫ g(y) y^{n−1} ∫ f(z) D(x,y,z) z^{n−1} dz dy by direct double quadrature.
    ///
    /// The outer integral runs in the stretched variable Y over (0, Y(y_max)), split at
    /// Y = X where the inner range [|X−Y|, X+Y] has a kink; `outer_nodes` Gauss nodes
    /// are shared evenly between the two pieces.
    pub fn sharp_at<F, G>(f: F, g: G, x: f64, y_max: f64, params: &ModelParams, outer_nodes: usize, inner_nodes: usize) -> Result<f64>
    where
        F: Fn(f64) -> f64,
        G: Fn(f64) -> f64,
    {
        if !(x > 0.0 && y_max > x) {
            return Err(Error::InvalidParameter(format!("need 0 < x < y_max (x = {x}, y_max = {y_max})")));
        }
        let order = 8usize;
        let panels = (outer_nodes / (2 * order)).max(1);
        let gl = quadrature::gauss_legendre(order)?;
        let inner = rule(params, inner_nodes)?;
        let c = params.stretch();
        let nm1 = params.n as f64 - 1.0;
        let xs = stretched(x, params);
        let ymax_s = stretched(y_max, params);
        let mut edges: Vec<f64> = (0..=panels).map(|i| xs * i as f64 / panels as f64).collect();
        edges.extend((1..=panels).map(|i| xs + (ymax_s - xs) * i as f64 / panels as f64));
        let outer = |ys: f64| {
            let y = (ys / c).powf(c);
            let translate = integrate_free(Free::Z, x, y, params, &inner, &f);
            translate * g(y) * (nm1 * y.ln() + (c - 1.0) * (ys / c).ln()).exp()
        };
        Ok(quadrature::integrate_panels(&edges, &gl, outer))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_core::derive_params;
    use approx::assert_relative_eq;

    #[test]
    fn kernel_closed_form_examples() {
        let p = derive_params(2, 0.0, 0).unwrap();
        assert_relative_eq!(kernel_k(0.0, 1.0, &p).unwrap(), 0.5, max_relative = 1e-15);
        let p = derive_params(3, 0.0, 0).unwrap();
        assert_relative_eq!(kernel_k(2.0, 1.0, &p).unwrap(), 2f64.powf(-1.5) * (-1f64).exp(), max_relative = 1e-14);
        assert!(kernel_k(1.0, 0.0, &p).is_err());
        assert!(kernel_k(-1.0, 1.0, &p).is_err());
        let fam = GaussianFamily::kernel(1.0, &p);
        assert_relative_eq!(fam.physical(2.0, &p), kernel_k(2.0, 1.0, &p).unwrap(), max_relative = 1e-14);
    }

    #[test]
    fn semigroup_kernel_half_order() {
        let p = derive_params(3, 0.0, 0).unwrap();
        let (r, rho, t) = (1.0f64, 1.0f64, 1.0f64);
        let z = r * rho / (2.0 * t);
        let i_half = (2.0 / (PI * z)).sqrt() * z.sinh();
        let want = (r * rho).powf(-0.5) / (2.0 * t) * (-(r * r + rho * rho) / (4.0 * t)).exp() * i_half;
        assert_relative_eq!(semigroup_kernel(rho, r, t, &p).unwrap(), want, max_relative = 1e-13);
    }

    #[test]
    fn semigroup_kernel_small_time_is_finite() {
        let p = derive_params(3, 1.0, 2).unwrap();
        for &(rho, r) in &[(1e-6, 1e-6), (50.0, 50.0), (50.0, 49.9), (1e-3, 30.0)] {
            let v = semigroup_kernel(rho, r, 1e-6, &p).unwrap();
            assert!(v.is_finite() && v >= 0.0, "rho={rho} r={r} v={v}");
        }
    }

    #[test]
    fn delsarte_support_and_degeneracy() {
        let p = derive_params(3, 0.0, 0).unwrap();
        assert_eq!(delsarte_d(1.0, 1.0, 3.0, &p).unwrap().value, 0.0);
        let p2 = derive_params(4, 0.0, 1).unwrap();
        let d = delsarte_d(1.0, 1.0, 2.0, &p2).unwrap();
        assert_eq!(d.value, 0.0);
        assert!(d.near_degenerate);
        assert!(delsarte_d(1.0, 1.0, 1.0, &p).unwrap().value > 0.0);
        assert!(delsarte_d(0.0, 1.0, 1.0, &p).is_err());
    }

    #[test]
    fn delsarte_symmetric_in_last_two() {
        let p = derive_params(3, 0.5, 1).unwrap();
        let a = delsarte_d(1.3, 0.8, 1.1, &p).unwrap().value;
        let b = delsarte_d(1.3, 1.1, 0.8, &p).unwrap().value;
        assert_relative_eq!(a, b, max_relative = 1e-14);
    }

    #[test]
    fn free_side_quadrature_matches_closed_form() {
        // integrate D directly over z with composite Gauss–Legendre as a cross-check
        let p = derive_params(3, 1.0, 1).unwrap();
        let (x, y) = (1.2, 0.7);
        let c = p.stretch();
        let (xs, ys) = (stretched(x, &p), stretched(y, &p));
        let (lo, hi) = ((xs - ys).abs(), xs + ys);
        let gl = quadrature::gauss_legendre(16).unwrap();
        let edges: Vec<f64> = (0..=64).map(|i| lo + (hi - lo) * i as f64 / 64.0).collect();
        let direct = quadrature::integrate_panels(&edges, &gl, |zs| {
            let z = (zs / c).powf(c);
            delsarte_d(x, y, z, &p).unwrap().value * z.powi(3) * (zs / c).powf(c - 1.0)
        });
        let via = oracle::identity_z(x, y, &p, 32).unwrap();
        // identity_z integrates z^k D z^{n−1}, k = 1, n = 3 → the same integrand
        assert_relative_eq!(via, direct, max_relative = 1e-6);
    }

    #[test]
    fn family_norm_matches_quadrature() {
        let p = derive_params(3, 0.5, 1).unwrap();
        let fam = GaussianFamily::new(0.7, 2.0);
        let gl = quadrature::gauss_legendre(16).unwrap();
        let edges: Vec<f64> = (0..=200).map(|i| 30.0 * i as f64 / 200.0).collect();
        for &q in &[1.0, 2.0, 3.5] {
            let e = p.eta_exponent(1);
            let quad = quadrature::integrate_panels(&edges, &gl, |r| {
                if r == 0.0 {
                    return 0.0;
                }
                (fam.physical(r, &p) / r).abs().powf(q) * r.powf(e)
            })
            .powf(1.0 / q);
            assert_relative_eq!(fam.lp_norm(q, &p), quad, max_relative = 1e-9);
        }
    }
}
