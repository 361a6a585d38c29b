//! Fixed-order Gauss rules and composite panel integration.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::specfun;

/// A set of nodes and weights, nodes ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Gauss–Legendre rule on [−1, 1] by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> Result<Rule> {
    if n == 0 {
        return Err(Error::InvalidParameter("Gauss-Legendre order must be >= 1".into()));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok(Rule { nodes, weights })
}

/// Golub–Welsch: nodes and weights from a symmetric tridiagonal Jacobi matrix.
fn golub_welsch(diag: &[f64], off: &[f64], total_weight: f64) -> Rule {
    let n = diag.len();
    let mut jm = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        jm[(i, i)] = diag[i];
        if i + 1 < n {
            jm[(i, i + 1)] = off[i];
            jm[(i + 1, i)] = off[i];
        }
    }
    let eig = SymmetricEigen::new(jm);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], total_weight * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Rule { nodes: pairs.iter().map(|p| p.0).collect(), weights: pairs.iter().map(|p| p.1).collect() }
}

/// Gauss rule for the weight (1 − t²)^a on [−1, 1], a > −1.
pub fn gauss_gegenbauer(n: usize, a: f64) -> Result<Rule> {
    if n == 0 || !(a > -1.0) {
        return Err(Error::InvalidParameter(format!("Gegenbauer rule needs n >= 1, a > -1 (a = {a})")));
    }
    let diag = vec![0.0; n];
    let off: Vec<f64> = (1..n)
        .map(|k| {
            let k = k as f64;
            // k(k+2a)/((2k+2a−1)(2k+2a+1)), with the k = 1 factor (1+2a) cancelled
            let b2 = if k == 1.0 {
                1.0 / (3.0 + 2.0 * a)
            } else {
                k * (k + 2.0 * a) / ((2.0 * k + 2.0 * a - 1.0) * (2.0 * k + 2.0 * a + 1.0))
            };
            b2.sqrt()
        })
        .collect();
    let total = (0.5 * std::f64::consts::PI.ln() + specfun::ln_gamma(a + 1.0)?
        - specfun::ln_gamma(a + 1.5)?)
    .exp();
    Ok(golub_welsch(&diag, &off, total))
}

/// Gauss rule for the weight u^a e^{−u} on (0, ∞), a > −1.
pub fn gauss_laguerre(n: usize, a: f64) -> Result<Rule> {
    if n == 0 || !(a > -1.0) {
        return Err(Error::InvalidParameter(format!("Laguerre rule needs n >= 1, a > -1 (a = {a})")));
    }
    let diag: Vec<f64> = (0..n).map(|k| 2.0 * k as f64 + a + 1.0).collect();
    let off: Vec<f64> = (1..n).map(|k| (k as f64 * (k as f64 + a)).sqrt()).collect();
    Ok(golub_welsch(&diag, &off, specfun::gamma_fn(a + 1.0)?))
}

/// Composite Gauss–Legendre over consecutive panels `edges[i]..edges[i+1]`.
pub fn integrate_panels<F: Fn(f64) -> f64>(edges: &[f64], rule: &Rule, f: F) -> f64 {
    let mut total = 0.0;
    for w in edges.windows(2) {
        let half = 0.5 * (w[1] - w[0]);
        let mid = 0.5 * (w[1] + w[0]);
        let mut s = 0.0;
        for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
            s += wt * f(mid + half * x);
        }
        total += half * s;
    }
    total
}
