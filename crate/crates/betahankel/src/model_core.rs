//! Model parameters, derived exponents and triplet arithmetic.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::specfun;

/// Distance kept from the singular weight β = 2.
pub const BETA_EPS: f64 = 1e-3;

const REL_SLACK: f64 = 1e-12;

/// Fixed (n, β, k) together with every exponent derived from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    pub n: u32,
    pub beta: f64,
    pub k: u32,
    /// λ = (n−2)/2
    pub lambda: f64,
    /// μ(k) = λ + k
    pub mu_k: f64,
    /// μ(β,k) = 2μ(k)/(2−β), the Bessel order of the transform
    pub mu: f64,
    /// γ = (n−β+2k)/(2−β)
    pub gamma: f64,
    /// α = β − k
    pub alpha: f64,
}

pub fn derive_params(n: u32, beta: f64, k: u32) -> Result<ModelParams> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("dimension n = {n} must be at least 2")));
    }
    if !beta.is_finite() || !(0.0..=2.0 - BETA_EPS).contains(&beta) {
        return Err(Error::InvalidParameter(format!(
            "beta = {beta} must lie in [0, {}]",
            2.0 - BETA_EPS
        )));
    }
    let nf = n as f64;
    let kf = k as f64;
    let lambda = (nf - 2.0) / 2.0;
    let mu_k = lambda + kf;
    let mu = 2.0 * mu_k / (2.0 - beta);
    let gamma = (nf - beta + 2.0 * kf) / (2.0 - beta);
    Ok(ModelParams { n, beta, k, lambda, mu_k, mu, gamma, alpha: beta - kf })
}

impl ModelParams {
    pub fn new(n: u32, beta: f64, k: u32) -> Result<Self> {
        derive_params(n, beta, k)
    }

    /// Same (n, β) with a different harmonic degree.
    pub fn with_k(&self, k: u32) -> Self {
        derive_params(self.n, self.beta, k).expect("n and beta already validated")
    }

    pub fn two_minus_beta(&self) -> f64 {
        2.0 - self.beta
    }

    /// c = 2/(2−β): the stretched radius is c·r^a.
    pub fn stretch(&self) -> f64 {
        2.0 / (2.0 - self.beta)
    }

    /// a = (2−β)/2
    pub fn half_power(&self) -> f64 {
        (2.0 - self.beta) / 2.0
    }

    /// Exponent of the measure dη for degree k: r^{2k+n−1−β}.
    pub fn eta_exponent(&self, k: u32) -> f64 {
        2.0 * k as f64 + self.n as f64 - 1.0 - self.beta
    }

    /// Γ(μ+1)^{−1}(2−β)^{−μ}, the constant of the ♯-Young inequality.
    pub fn young_constant(&self) -> f64 {
        (-specfun::ln_gamma(self.mu + 1.0).expect("mu > -1/2") - self.mu * self.two_minus_beta().ln())
            .exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TripletKind {
    Admissible,
    Generalized,
    Neither,
}

impl TripletKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TripletKind::Admissible => "admissible",
            TripletKind::Generalized => "generalized",
            TripletKind::Neither => "neither",
        }
    }
}

/// Lebesgue exponents (m, p, q); `f64::INFINITY` stands for ∞.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Triplet {
    pub m: f64,
    pub p: f64,
    pub q: f64,
    pub kind: TripletKind,
}

impl Triplet {
    pub fn inv_m(&self) -> f64 {
        1.0 / self.m
    }
}

fn check_exponent(name: &str, v: f64) -> Result<()> {
    if v.is_nan() || v <= 1.0 {
        return Err(Error::InvalidParameter(format!("exponent {name} = {v} must lie in (1, inf]")));
    }
    Ok(())
}

/// m with 1/m = γ(1/q − 1/p); ∞ when p = q.
pub fn admissible_m(p: f64, q: f64, params: &ModelParams) -> Result<f64> {
    check_exponent("q", q)?;
    if p.is_nan() || p < q {
        return Err(Error::InvalidParameter(format!("need p >= q, got p = {p}, q = {q}")));
    }
    if p == q {
        return Ok(f64::INFINITY);
    }
    Ok(1.0 / (params.gamma * (1.0 / q - 1.0 / p)))
}

fn relation_holds(m: f64, p: f64, q: f64, gamma: f64) -> bool {
    let lhs = 1.0 / m;
    let rhs = gamma * (1.0 / q - 1.0 / p);
    let scale = lhs.abs().max(rhs.abs());
    if scale == 0.0 {
        return true;
    }
    (lhs - rhs).abs() <= REL_SLACK * scale
}

fn strictly_below(p: f64, bound: f64) -> bool {
    p < bound * (1.0 - REL_SLACK)
}

fn admissible_bound_holds(p: f64, q: f64, params: &ModelParams) -> bool {
    let n = params.n as f64;
    let k = params.k as f64;
    if n > 2.0 - 2.0 * k {
        let bound = q * (n - params.beta + 2.0 * k) / (n + 2.0 * k - 2.0);
        strictly_below(p, bound)
    } else {
        p.is_finite()
    }
}

fn generalized_bound_holds(p: f64, q: f64, params: &ModelParams) -> bool {
    let n = params.n as f64;
    let k = params.k as f64;
    let b = params.beta;
    if q.is_infinite() {
        // the denominator below tends to −∞, so only p < ∞ could apply and p ≥ q = ∞
        return false;
    }
    let denom = n + 2.0 * k - 2.0 * q + (q - 1.0) * b;
    if denom > 0.0 {
        strictly_below(p, q * (n - b + 2.0 * k) / denom)
    } else {
        p.is_finite()
    }
}

pub fn classify_triplet(m: f64, p: f64, q: f64, params: &ModelParams) -> Result<Triplet> {
    check_exponent("m", m)?;
    check_exponent("p", p)?;
    check_exponent("q", q)?;
    let kind = if q > p || !relation_holds(m, p, q, params.gamma) {
        TripletKind::Neither
    } else if admissible_bound_holds(p, q, params) {
        TripletKind::Admissible
    } else if generalized_bound_holds(p, q, params) {
        TripletKind::Generalized
    } else {
        TripletKind::Neither
    };
    Ok(Triplet { m, p, q, kind })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    /// F(u) = +|u|^b u
    Focusing,
    /// F(u) = −|u|^b u
    Defocusing,
}

impl Sign {
    pub fn factor(&self) -> f64 {
        match self {
            Sign::Focusing => 1.0,
            Sign::Defocusing => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NonlinearitySpec {
    pub b: f64,
    pub sign: Sign,
    /// critical exponent γ·b
    pub q0: f64,
}

impl NonlinearitySpec {
    pub fn new(b: f64, sign: Sign, params: &ModelParams) -> Result<Self> {
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::InvalidParameter(format!("nonlinearity power b = {b} must be > 0")));
        }
        Ok(NonlinearitySpec { b, sign, q0: params.gamma * b })
    }

    /// ±|u|^b u
    #[inline]
    pub fn apply(&self, u: f64) -> f64 {
        self.sign.factor() * u.abs().powf(self.b) * u
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_values() {
        let p = derive_params(3, 0.0, 0).unwrap();
        assert_eq!((p.lambda, p.mu_k, p.mu, p.gamma, p.alpha), (0.5, 0.5, 0.5, 1.5, 0.0));
        let p = derive_params(4, 1.0, 1).unwrap();
        assert_eq!((p.lambda, p.mu_k, p.mu, p.gamma, p.alpha), (1.0, 2.0, 4.0, 5.0, 0.0));
        let p = derive_params(2, 1.5, 0).unwrap();
        assert_eq!((p.lambda, p.mu_k, p.mu, p.gamma, p.alpha), (0.0, 0.0, 0.0, 1.0, 1.5));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(derive_params(1, 0.0, 0).is_err());
        assert!(derive_params(3, 2.5, 0).is_err());
        assert!(derive_params(3, -0.1, 0).is_err());
        assert!(derive_params(3, 1.9995, 0).is_err());
        assert!(derive_params(3, 1.999, 0).is_ok());
    }

    #[test]
    fn m_from_p_q() {
        let p = derive_params(3, 1.0, 0).unwrap();
        assert!((admissible_m(3.0, 2.0, &p).unwrap() - 3.0).abs() < 1e-14);
        assert!((admissible_m(4.0, 2.0, &p).unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(admissible_m(2.0, 2.0, &p).unwrap(), f64::INFINITY);
        assert!(admissible_m(2.0, 1.0, &p).is_err());
        assert!(admissible_m(2.0, 3.0, &p).is_err());
    }

    #[test]
    fn classification_examples() {
        let p = derive_params(3, 1.0, 0).unwrap();
        assert_eq!(classify_triplet(3.0, 3.0, 2.0, &p).unwrap().kind, TripletKind::Admissible);
        assert_eq!(classify_triplet(2.0, 4.0, 2.0, &p).unwrap().kind, TripletKind::Generalized);
        assert_eq!(classify_triplet(5.0, 3.0, 2.0, &p).unwrap().kind, TripletKind::Neither);
        assert!(classify_triplet(3.0, 3.0, 1.0, &p).is_err());
    }

    #[test]
    fn heat_reduction_gamma() {
        for n in 2..7 {
            let p = derive_params(n, 0.0, 0).unwrap();
            assert_eq!(p.gamma, n as f64 / 2.0);
        }
        // classical n = 3 heat triplet: 1/m = 3/2 (1/2 − 1/3) = 1/4
        let p = derive_params(3, 0.0, 0).unwrap();
        assert!((admissible_m(3.0, 2.0, &p).unwrap() - 4.0).abs() < 1e-13);
        assert_eq!(classify_triplet(4.0, 3.0, 2.0, &p).unwrap().kind, TripletKind::Admissible);
    }

    #[test]
    fn nonlinearity() {
        let p = derive_params(3, 1.0, 0).unwrap();
        let nl = NonlinearitySpec::new(1.0, Sign::Focusing, &p).unwrap();
        assert_eq!(nl.q0, 2.0);
        assert_eq!(nl.apply(-2.0), -4.0);
        let nl = NonlinearitySpec::new(2.0, Sign::Defocusing, &p).unwrap();
        assert_eq!(nl.apply(2.0), -8.0);
        assert!(NonlinearitySpec::new(0.0, Sign::Focusing, &p).is_err());
    }
}
