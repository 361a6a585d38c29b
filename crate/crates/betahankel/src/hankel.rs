//! The weighted Hankel transform pair as dense quadrature matrices.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model_core::ModelParams;
use crate::radial_numerics::{same_grid, GridFunction, RadialGrid, Space};
use crate::specfun;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// y = M x. Rows run in parallel; each dot product is summed in index order.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matrix-vector length mismatch");
        self.data
            .par_chunks(self.cols)
            .map(|row| row.iter().zip(x).fold(0.0, |s, (a, b)| s + a * b))
            .collect()
    }
}

/// U(w) = w^{(2−n−2β)/2} J_μ(c w^a)
pub fn kernel_u(w: f64, params: &ModelParams) -> Result<f64> {
    let j = specfun::bessel_j(params.mu, params.stretch() * w.powf(params.half_power()))?;
    Ok(w.powf((2.0 - params.n as f64 - 2.0 * params.beta) / 2.0) * j)
}

/// V(w) = w^{(2−n)/2} J_μ(c w^a)
pub fn kernel_v(w: f64, params: &ModelParams) -> Result<f64> {
    let j = specfun::bessel_j(params.mu, params.stretch() * w.powf(params.half_power()))?;
    Ok(w.powf((2.0 - params.n as f64) / 2.0) * j)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanOptions {
    /// Minimum Gauss nodes per period of the kernel at the largest product rρ.
    pub min_nodes_per_period: f64,
}

impl Default for PlanOptions {
    fn default() -> Self {
        PlanOptions { min_nodes_per_period: 8.0 }
    }
}

/// Controls the automatic grid pair built by [`TransformPlan::for_scales`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSizing {
    pub order: usize,
    pub nodes_per_period: f64,
    /// Truncate where the Gaussian-family data has decayed by e^{−tail}.
    pub tail: f64,
    /// Decades covered by log panels below the knee.
    pub decades_below_knee: f64,
    /// Width of one log panel in ln r.
    pub log_panel_width: f64,
}

impl Default for GridSizing {
    fn default() -> Self {
        GridSizing { order: 8, nodes_per_period: 12.0, tail: 36.0, decades_below_knee: 9.0, log_panel_width: 0.8 }
    }
}

impl GridSizing {
    /// Panel counts scaled by `factor` (used for refinement studies).
    pub fn refined(&self, factor: f64) -> Self {
        GridSizing {
            nodes_per_period: self.nodes_per_period * factor,
            log_panel_width: self.log_panel_width / factor,
            ..*self
        }
    }
}

fn phase_periods(lo: f64, hi: f64, other_extent: f64, params: &ModelParams) -> f64 {
    let a = params.half_power();
    params.stretch() * other_extent.powf(a) * (hi.powf(a) - lo.powf(a)) / (2.0 * PI)
}

/// Hybrid grid on [r_min, extent] resolving the kernel against the other grid's extent.
pub fn sized_grid(extent: f64, other_extent: f64, params: &ModelParams, sizing: &GridSizing) -> Result<RadialGrid> {
    let tb = params.two_minus_beta();
    // below the knee the stretched Bessel argument stays under 2
    let knee = tb.powf(2.0 / tb) / other_extent;
    if !(knee < extent) {
        return Err(Error::Resolution(format!(
            "extent {extent} is inside the knee {knee}; increase the extents"
        )));
    }
    let r_min = knee * 10f64.powf(-sizing.decades_below_knee);
    let log_panels = (sizing.decades_below_knee * std::f64::consts::LN_10 / sizing.log_panel_width).ceil() as usize;
    let per_panel = sizing.order as f64 / sizing.nodes_per_period;
    let outer = (phase_periods(knee, extent, other_extent, params) / per_panel).ceil().max(1.0) as usize;
    RadialGrid::hybrid(r_min, knee, extent, log_panels.max(1), outer, sizing.order, params.half_power())
}

/// Precomputed forward (U) and inverse (V) quadrature matrices for one grid pair.
#[derive(Debug, Clone)]
pub struct TransformPlan {
    physical: Arc<RadialGrid>,
    spectral: Arc<RadialGrid>,
    params: ModelParams,
    forward: DenseMatrix,
    inverse: DenseMatrix,
}

fn check_oscillation(g: &RadialGrid, other_extent: f64, params: &ModelParams, opts: &PlanOptions, label: &str) -> Result<()> {
    let order = g.nodes_per_panel() as f64;
    for (i, e) in g.panel_edges().windows(2).enumerate() {
        let periods = phase_periods(e[0], e[1], other_extent, params);
        if order < opts.min_nodes_per_period * periods * (1.0 - 1e-9) {
            return Err(Error::Resolution(format!(
                "{label} panel {i} [{:.6e}, {:.6e}] has {:.2} nodes per kernel period, need {}",
                e[0],
                e[1],
                order / periods,
                opts.min_nodes_per_period
            )));
        }
    }
    Ok(())
}

fn build_matrix<K>(out: &RadialGrid, inp: &RadialGrid, n: u32, kernel: K) -> Result<DenseMatrix>
where
    K: Fn(f64) -> Result<f64> + Sync,
{
    let scale: Vec<f64> = inp
        .nodes()
        .iter()
        .zip(inp.weights())
        .map(|(x, w)| x.powi(n as i32 - 1) * w)
        .collect();
    let rows: Vec<Vec<f64>> = out
        .nodes()
        .par_iter()
        .map(|&y| {
            inp.nodes()
                .iter()
                .zip(&scale)
                .map(|(&x, s)| kernel(y * x).map(|k| k * s))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let data: Vec<f64> = rows.into_iter().flatten().collect();
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("kernel matrix entry {i}")));
    }
    Ok(DenseMatrix { rows: out.len(), cols: inp.len(), data })
}

pub fn plan_transform(pg: Arc<RadialGrid>, sg: Arc<RadialGrid>, params: ModelParams) -> Result<TransformPlan> {
    plan_transform_with(pg, sg, params, &PlanOptions::default())
}

pub fn plan_transform_with(
    pg: Arc<RadialGrid>,
    sg: Arc<RadialGrid>,
    params: ModelParams,
    opts: &PlanOptions,
) -> Result<TransformPlan> {
    check_oscillation(&pg, sg.r_max(), &params, opts, "physical")?;
    check_oscillation(&sg, pg.r_max(), &params, opts, "spectral")?;
    let forward = build_matrix(&sg, &pg, params.n, |w| kernel_u(w, &params))?;
    let inverse = build_matrix(&pg, &sg, params.n, |w| kernel_v(w, &params))?;
    Ok(TransformPlan { physical: pg, spectral: sg, params, forward, inverse })
}

impl TransformPlan {
    /// Grid pair for data of the form r^k exp(−r^{2−β}/((2−β)²s)) with s in [tau_min, tau_max],
    /// and for their semigroup evolutions over the same scale range.
    pub fn for_scales(params: ModelParams, tau_min: f64, tau_max: f64, sizing: &GridSizing) -> Result<Self> {
        if !(tau_min > 0.0 && tau_max >= tau_min && tau_max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "scale range must satisfy 0 < tau_min <= tau_max (got {tau_min}, {tau_max})"
            )));
        }
        let tb = params.two_minus_beta();
        let r_max = (sizing.tail * tb * tb * tau_max).powf(1.0 / tb);
        let rho_max = (sizing.tail / tau_min).powf(1.0 / tb);
        Self::for_extents(params, r_max, rho_max, sizing)
    }

    /// Grid pair with explicit physical and spectral truncation radii.
    pub fn for_extents(params: ModelParams, r_max: f64, rho_max: f64, sizing: &GridSizing) -> Result<Self> {
        if !(r_max > 0.0 && rho_max > 0.0) {
            return Err(Error::InvalidParameter("extents must be positive".into()));
        }
        let pg = Arc::new(sized_grid(r_max, rho_max, &params, sizing)?);
        let sg = Arc::new(sized_grid(rho_max, r_max, &params, sizing)?);
        plan_transform_with(pg, sg, params, &PlanOptions { min_nodes_per_period: sizing.nodes_per_period })
    }

    pub fn physical_grid(&self) -> &Arc<RadialGrid> {
        &self.physical
    }
    pub fn spectral_grid(&self) -> &Arc<RadialGrid> {
        &self.spectral
    }
    pub fn params(&self) -> &ModelParams {
        &self.params
    }
    pub fn forward_matrix(&self) -> &DenseMatrix {
        &self.forward
    }
    pub fn inverse_matrix(&self) -> &DenseMatrix {
        &self.inverse
    }

    pub fn forward_values(&self, v: &[f64]) -> Vec<f64> {
        self.forward.apply(v)
    }
    pub fn inverse_values(&self, v: &[f64]) -> Vec<f64> {
        self.inverse.apply(v)
    }

    /// Zero function on the physical grid.
    pub fn physical_zeros(&self) -> GridFunction {
        GridFunction::zeros(self.physical.clone(), Space::Physical, self.params)
    }

    pub fn physical_fn<F: Fn(f64) -> f64>(&self, f: F) -> Result<GridFunction> {
        GridFunction::from_fn(self.physical.clone(), Space::Physical, self.params, f)
    }

    pub fn spectral_fn<F: Fn(f64) -> f64>(&self, f: F) -> Result<GridFunction> {
        GridFunction::from_fn(self.spectral.clone(), Space::Spectral, self.params, f)
    }

    pub(crate) fn physical_from(&self, values: Vec<f64>) -> Result<GridFunction> {
        GridFunction::new(self.physical.clone(), values, Space::Physical, self.params)
    }

    pub(crate) fn spectral_from(&self, values: Vec<f64>) -> Result<GridFunction> {
        GridFunction::new(self.spectral.clone(), values, Space::Spectral, self.params)
    }

    pub(crate) fn check_physical(&self, f: &GridFunction) -> Result<()> {
        if f.space() != Space::Physical {
            return Err(Error::GridMismatch("expected a physical-space function".into()));
        }
        if !same_grid(f.grid(), &self.physical) {
            return Err(Error::GridMismatch("function is not on the plan's physical grid".into()));
        }
        if f.params() != &self.params {
            return Err(Error::GridMismatch("function and plan carry different model parameters".into()));
        }
        Ok(())
    }

    pub(crate) fn check_spectral(&self, f: &GridFunction) -> Result<()> {
        if f.space() != Space::Spectral {
            return Err(Error::GridMismatch("expected a spectral-space function".into()));
        }
        if !same_grid(f.grid(), &self.spectral) {
            return Err(Error::GridMismatch("function is not on the plan's spectral grid".into()));
        }
        if f.params() != &self.params {
            return Err(Error::GridMismatch("function and plan carry different model parameters".into()));
        }
        Ok(())
    }
}

/// H φ(ρ) = ∫ U(rρ) φ(r) r^{n−1} dr
pub fn hankel_forward(f: &GridFunction, plan: &TransformPlan) -> Result<GridFunction> {
    plan.check_physical(f)?;
    plan.spectral_from(plan.forward.apply(f.values()))
}

/// H⁻¹ ψ(r) = ∫ V(rρ) ψ(ρ) ρ^{n−1} dρ
pub fn hankel_inverse(f: &GridFunction, plan: &TransformPlan) -> Result<GridFunction> {
    plan.check_spectral(f)?;
    plan.physical_from(plan.inverse.apply(f.values()))
}

pub fn spectral_multiply<S: Fn(f64) -> f64>(f: &GridFunction, symbol: S) -> Result<GridFunction> {
    if f.space() != Space::Spectral {
        return Err(Error::GridMismatch("spectral_multiply needs a spectral-space function".into()));
    }
    let mut out = Vec::with_capacity(f.len());
    for (rho, v) in f.grid().nodes().iter().zip(f.values()) {
        let s = symbol(*rho);
        if !s.is_finite() {
            return Err(Error::NonFinite(format!("symbol is {s} at rho = {rho}")));
        }
        out.push(v * s);
    }
    f.with_values(out)
}

/// Finite-difference weights for derivatives 0..=m at z (Fornberg's recursion).
pub fn fornberg_weights(z: f64, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c
}

/// A_{μ(k)} f evaluated by 7-point finite differences, with boundary flags.
#[derive(Debug, Clone)]
pub struct OperatorOutput {
    pub values: GridFunction,
    /// true at the two nodes at each end, which use one-sided stencils
    pub boundary: Vec<bool>,
}

const STENCIL: usize = 7;

/// A f = −f'' − (n−1)/r f' + (μ(k)² − λ²)/r² f on the function's own grid.
pub fn apply_operator_a(f: &GridFunction, params: &ModelParams) -> Result<OperatorOutput> {
    let nodes = f.grid().nodes();
    let len = nodes.len();
    if len < STENCIL {
        return Err(Error::Resolution(format!("finite differences need {STENCIL} nodes, grid has {len}")));
    }
    let potential = params.mu_k * params.mu_k - params.lambda * params.lambda;
    let nm1 = params.n as f64 - 1.0;
    let vals = f.values();
    let mut out = Vec::with_capacity(len);
    let mut boundary = Vec::with_capacity(len);
    for i in 0..len {
        let start = i.saturating_sub(STENCIL / 2).min(len - STENCIL);
        let stencil = &nodes[start..start + STENCIL];
        let w = fornberg_weights(nodes[i], stencil, 2);
        let (mut d1, mut d2) = (0.0, 0.0);
        // derivative weights sum to zero; differencing against the centre avoids cancellation
        for (j, wj) in w.iter().enumerate() {
            let dv = vals[start + j] - vals[i];
            d1 += wj[1] * dv;
            d2 += wj[2] * dv;
        }
        let r = nodes[i];
        out.push(-d2 - nm1 / r * d1 + potential / (r * r) * vals[i]);
        boundary.push(i < 2 || i + 2 >= len);
    }
    Ok(OperatorOutput { values: f.with_values(out)?, boundary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_core::derive_params;
    use crate::radial_numerics::build_grid;
    use approx::assert_relative_eq;

    #[test]
    fn kernels_reduce_to_classical_forms() {
        let p = derive_params(2, 0.0, 0).unwrap();
        for &w in &[0.1, 1.0, 7.5] {
            let j0 = specfun::bessel_j(0.0, w).unwrap();
            assert_relative_eq!(kernel_u(w, &p).unwrap(), j0, max_relative = 1e-14);
            assert_relative_eq!(kernel_v(w, &p).unwrap(), j0, max_relative = 1e-14);
        }
        let p = derive_params(3, 0.0, 0).unwrap();
        for &w in &[0.1f64, 1.0, 7.5, 20.0] {
            let want = (2.0 / PI).sqrt() * w.sin() / w;
            assert!((kernel_u(w, &p).unwrap() - want).abs() < 1e-12);
            assert!((kernel_v(w, &p).unwrap() - want).abs() < 1e-12);
        }
        let p = derive_params(3, 1.0, 0).unwrap();
        for &w in &[0.1f64, 1.0, 7.5, 20.0] {
            let j1 = specfun::bessel_j(1.0, 2.0 * w.sqrt()).unwrap();
            assert_relative_eq!(kernel_u(w, &p).unwrap(), w.powf(-1.5) * j1, max_relative = 1e-13);
            assert_relative_eq!(kernel_v(w, &p).unwrap(), w.powf(-0.5) * j1, max_relative = 1e-13);
        }
    }

    #[test]
    fn fornberg_exact_on_quartics() {
        let x = [0.1, 0.25, 0.3, 0.7, 0.71];
        let w = fornberg_weights(0.3, &x, 2);
        let f = |t: f64| 1.0 + 2.0 * t - t * t + 0.5 * t.powi(3) - t.powi(4);
        let d1 = |t: f64| 2.0 - 2.0 * t + 1.5 * t * t - 4.0 * t.powi(3);
        let d2 = |t: f64| -2.0 + 3.0 * t - 12.0 * t * t;
        let (mut a0, mut a1, mut a2) = (0.0, 0.0, 0.0);
        for (j, xj) in x.iter().enumerate() {
            a0 += w[j][0] * f(*xj);
            a1 += w[j][1] * f(*xj);
            a2 += w[j][2] * f(*xj);
        }
        assert!((a0 - f(0.3)).abs() < 1e-12);
        assert!((a1 - d1(0.3)).abs() < 1e-10);
        assert!((a2 - d2(0.3)).abs() < 1e-9);
    }

    #[test]
    fn operator_a_examples() {
        let g = Arc::new(build_grid(1e-3, 8.0, 96, 8).unwrap());
        let p = derive_params(3, 0.0, 0).unwrap();
        let f = GridFunction::from_fn(g.clone(), Space::Physical, p, |r| (-r * r).exp()).unwrap();
        let out = apply_operator_a(&f, &p).unwrap();
        for (i, &r) in g.nodes().iter().enumerate() {
            if out.boundary[i] {
                continue;
            }
            let want = (6.0 - 4.0 * r * r) * (-r * r).exp();
            // roundoff floor is eps/h² at the clustered inner nodes
            assert!((out.values.values()[i] - want).abs() < 1e-5 * want.abs().max(1.0), "r={r}");
        }
        let c = GridFunction::from_fn(g.clone(), Space::Physical, p, |_| 2.5).unwrap();
        let out = apply_operator_a(&c, &p).unwrap();
        let worst = out.values.values().iter().zip(&out.boundary).filter(|(_, b)| !**b).map(|(v, _)| v.abs()).fold(0.0, f64::max);
        assert!(worst < 1e-12, "{worst}");

        // n=3, k=1: f = r e^{−r²}, A f = −f'' − 2/r f' + 2/r² f = (10 r − 4 r³) e^{−r²}
        let p1 = derive_params(3, 0.0, 1).unwrap();
        let f = GridFunction::from_fn(g.clone(), Space::Physical, p1, |r| r * (-r * r).exp()).unwrap();
        let out = apply_operator_a(&f, &p1).unwrap();
        let i = g.nodes().iter().position(|&r| r > 1.0).unwrap();
        let r = g.nodes()[i];
        let want = (10.0 * r - 4.0 * r.powi(3)) * (-r * r).exp();
        assert!((out.values.values()[i] - want).abs() < 1e-5 * want.abs());

        // fourth order on uniform panels
        let err = |panels: usize| {
            let edges: Vec<f64> = (0..=panels).map(|i| 0.5 + 2.5 * i as f64 / panels as f64).collect();
            let g = Arc::new(crate::radial_numerics::RadialGrid::from_edges(edges, 4).unwrap());
            let f = GridFunction::from_fn(g.clone(), Space::Physical, p, |r| (-r * r).exp()).unwrap();
            let out = apply_operator_a(&f, &p).unwrap();
            g.nodes()
                .iter()
                .enumerate()
                .filter(|(i, _)| !out.boundary[*i])
                .map(|(i, &r)| (out.values.values()[i] - (6.0 - 4.0 * r * r) * (-r * r).exp()).abs())
                .fold(0.0, f64::max)
        };
        let order = (err(10) / err(20)).log2();
        assert!(order > 3.5, "observed order {order}");

        let tiny = Arc::new(build_grid(1.0, 2.0, 1, 4).unwrap());
        let f = GridFunction::zeros(tiny, Space::Physical, p);
        assert!(apply_operator_a(&f, &p).is_err());
    }

    #[test]
    fn oscillation_rule_enforced() {
        let p = derive_params(3, 0.0, 0).unwrap();
        let g = Arc::new(build_grid(1e-4, 40.0, 64, 8).unwrap());
        let err = plan_transform(g.clone(), g, p).unwrap_err();
        assert!(matches!(err, Error::Resolution(_)));
    }

    #[test]
    fn zero_maps_to_zero_and_grids_are_checked() {
        let p = derive_params(3, 1.0, 0).unwrap();
        let plan = TransformPlan::for_scales(p, 0.5, 2.0, &GridSizing::default()).unwrap();
        let z = plan.physical_zeros();
        let fz = hankel_forward(&z, &plan).unwrap();
        assert!(fz.values().iter().all(|v| *v == 0.0));
        let iz = hankel_inverse(&fz, &plan).unwrap();
        assert!(iz.values().iter().all(|v| *v == 0.0));
        assert!(hankel_inverse(&z, &plan).is_err());
        assert!(hankel_forward(&fz, &plan).is_err());
        let one = spectral_multiply(&fz, |_| 1.0).unwrap();
        assert_eq!(one, fz);
        assert!(spectral_multiply(&fz, |_| f64::NAN).is_err());
    }
}
