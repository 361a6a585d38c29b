//! Panel Gauss grids on (0, ∞), sampled functions and weighted L^p norms.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model_core::ModelParams;
use crate::quadrature::{self, Rule};

/// Panelized radial nodes with plain quadrature weights for ∫ · dr.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    r_min: f64,
    r_max: f64,
    edges: Vec<f64>,
    nodes_per_panel: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl RadialGrid {
    /// Gauss–Legendre of the given order on every panel `edges[i]..edges[i+1]`.
    pub fn from_edges(edges: Vec<f64>, order: usize) -> Result<Self> {
        if order < 2 {
            return Err(Error::InvalidParameter(format!("panel order {order} must be >= 2")));
        }
        if edges.len() < 2 {
            return Err(Error::InvalidParameter("need at least one panel".into()));
        }
        if !(edges[0] > 0.0) || edges.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidParameter(format!("r_min = {} must be positive and finite", edges[0])));
        }
        if edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("panel edges must be strictly increasing".into()));
        }
        let rule = quadrature::gauss_legendre(order)?;
        let mut nodes = Vec::with_capacity(order * (edges.len() - 1));
        let mut weights = Vec::with_capacity(nodes.capacity());
        for w in edges.windows(2) {
            let half = 0.5 * (w[1] - w[0]);
            let mid = 0.5 * (w[1] + w[0]);
            for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
                nodes.push(mid + half * x);
                weights.push(half * wt);
            }
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Resolution("panels too narrow to separate nodes in floating point".into()));
        }
        Ok(RadialGrid {
            r_min: edges[0],
            r_max: *edges.last().unwrap(),
            edges,
            nodes_per_panel: order,
            nodes,
            weights,
        })
    }

    /// Log-spaced panels between r_min and r_max.
    pub fn log_spaced(r_min: f64, r_max: f64, panels: usize, order: usize) -> Result<Self> {
        if !(r_min > 0.0) {
            return Err(Error::InvalidParameter(format!("r_min = {r_min} must be positive")));
        }
        if !(r_max > r_min) || panels < 1 {
            return Err(Error::InvalidParameter(format!(
                "need r_max > r_min and panels >= 1 (r_min = {r_min}, r_max = {r_max}, panels = {panels})"
            )));
        }
        let edges = geomspace(r_min, r_max, panels + 1);
        Self::from_edges(edges, order)
    }

    /// Log-spaced panels on [r_min, knee], then panels uniform in r^power on [knee, r_max]
    /// (split where they would be wider in ln r than a log panel).
    ///
    /// With power = (2−β)/2 the outer panels have equal phase for the stretched
    /// Bessel argument, so every outer panel sees the same number of oscillations.
    pub fn hybrid(
        r_min: f64,
        knee: f64,
        r_max: f64,
        log_panels: usize,
        outer_panels: usize,
        order: usize,
        power: f64,
    ) -> Result<Self> {
        if !(r_min > 0.0 && knee > r_min && r_max > knee) || log_panels < 1 || outer_panels < 1 {
            return Err(Error::InvalidParameter(format!(
                "hybrid grid needs 0 < r_min < knee < r_max and panel counts >= 1 \
                 (r_min = {r_min}, knee = {knee}, r_max = {r_max})"
            )));
        }
        if !(power > 0.0) {
            return Err(Error::InvalidParameter(format!("stretch power {power} must be positive")));
        }
        let mut edges = geomspace(r_min, knee, log_panels + 1);
        // outer panels wider than a log panel in ln r are split geometrically
        let growth = (knee / r_min).ln() / log_panels as f64;
        let (lo, hi) = (knee.powf(power), r_max.powf(power));
        for i in 1..=outer_panels {
            let s = lo + (hi - lo) * i as f64 / outer_panels as f64;
            let right = if i == outer_panels { r_max } else { s.powf(1.0 / power) };
            let left = *edges.last().unwrap_or(&knee);
            let pieces = ((right / left).ln() / growth).ceil().max(1.0) as usize;
            if pieces > 1 {
                let inner = geomspace(left, right, pieces + 1);
                edges.extend_from_slice(&inner[1..pieces]);
            }
            edges.push(right);
        }
        Self::from_edges(edges, order)
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }
    pub fn r_max(&self) -> f64 {
        self.r_max
    }
    pub fn panels(&self) -> usize {
        self.edges.len() - 1
    }
    pub fn panel_edges(&self) -> &[f64] {
        &self.edges
    }
    pub fn nodes_per_panel(&self) -> usize {
        self.nodes_per_panel
    }
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Gauss rule used on each panel, on [−1, 1].
    pub fn panel_rule(&self) -> Rule {
        quadrature::gauss_legendre(self.nodes_per_panel).expect("order validated at construction")
    }
}

/// Default layout: 64 log panels of order 8 on [1e-4, 40].
pub fn build_grid(r_min: f64, r_max: f64, panels: usize, order: usize) -> Result<RadialGrid> {
    RadialGrid::log_spaced(r_min, r_max, panels, order)
}

pub(crate) fn geomspace(a: f64, b: f64, count: usize) -> Vec<f64> {
    let (la, lb) = (a.ln(), b.ln());
    let last = (count - 1) as f64;
    (0..count)
        .map(|i| {
            if i == 0 {
                a
            } else if i == count - 1 {
                b
            } else {
                (la + (lb - la) * i as f64 / last).exp()
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    /// r-domain
    Physical,
    /// ρ-domain
    Spectral,
}

impl Space {
    pub fn axis_label(&self) -> &'static str {
        match self {
            Space::Physical => "r",
            Space::Spectral => "rho",
        }
    }
}

pub(crate) fn same_grid(a: &Arc<RadialGrid>, b: &Arc<RadialGrid>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// Samples of a radial or spectral function on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
    space: Space,
    params: ModelParams,
}

impl GridFunction {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>, space: Space, params: ModelParams) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} values for {} nodes", values.len(), grid.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("value {} at node {i}", values[i])));
        }
        Ok(GridFunction { grid, values, space, params })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(grid: Arc<RadialGrid>, space: Space, params: ModelParams, f: F) -> Result<Self> {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self::new(grid, values, space, params)
    }

    pub fn zeros(grid: Arc<RadialGrid>, space: Space, params: ModelParams) -> Self {
        let values = vec![0.0; grid.len()];
        GridFunction { grid, values, space, params }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
    pub fn space(&self) -> Space {
        self.space
    }
    pub fn params(&self) -> &ModelParams {
        &self.params
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same grid, space and params with new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.grid.clone(), values, self.space, self.params)
    }

    pub fn map<F: Fn(f64, f64) -> f64>(&self, f: F) -> Result<Self> {
        let v = self.grid.nodes().iter().zip(&self.values).map(|(&r, &u)| f(r, u)).collect();
        self.with_values(v)
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        self.with_values(self.values.iter().map(|v| s * v).collect())
    }

    fn check_compatible(&self, other: &GridFunction) -> Result<()> {
        if self.space != other.space || !same_grid(&self.grid, &other.grid) {
            return Err(Error::GridMismatch("functions live on different grids or spaces".into()));
        }
        Ok(())
    }

    /// self + s·other
    pub fn axpy(&self, s: f64, other: &GridFunction) -> Result<Self> {
        self.check_compatible(other)?;
        self.with_values(self.values.iter().zip(&other.values).map(|(a, b)| a + s * b).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// CSV with header "r,value" or "rho,value", 17 significant digits.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record([self.space.axis_label(), "value"])?;
        for (r, v) in self.grid.nodes().iter().zip(&self.values) {
            wr.write_record([format!("{r:.16e}"), format!("{v:.16e}")])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    /// Reads values written by [`GridFunction::write_csv`]; nodes must match the grid.
    pub fn read_csv<R: Read>(r: R, grid: Arc<RadialGrid>, params: ModelParams) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header = rd.headers()?.clone();
        let space = match header.get(0) {
            Some("r") => Space::Physical,
            Some("rho") => Space::Spectral,
            other => return Err(Error::Io(format!("unexpected CSV header {other:?}"))),
        };
        let mut values = Vec::with_capacity(grid.len());
        for (i, rec) in rd.records().enumerate() {
            let rec = rec?;
            let parse = |j: usize| -> Result<f64> {
                rec.get(j)
                    .ok_or_else(|| Error::Io(format!("row {i}: missing column {j}")))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Io(format!("row {i}: {e}")))
            };
            let node = parse(0)?;
            let want = *grid.nodes().get(i).ok_or_else(|| Error::GridMismatch("more rows than nodes".into()))?;
            if (node - want).abs() > 1e-14 * want.abs() {
                return Err(Error::GridMismatch(format!("row {i}: node {node} differs from grid node {want}")));
            }
            values.push(parse(1)?);
        }
        Self::new(grid, values, space, params)
    }
}

/// Σ f(r_i) r_i^e w_i ≈ ∫ f(r) r^e dr.
pub fn integrate_weighted(f: &GridFunction, weight_exponent: f64) -> Result<f64> {
    let g = f.grid();
    let mut total = 0.0;
    for ((r, w), v) in g.nodes().iter().zip(g.weights()).zip(f.values()) {
        total += v * r.powf(weight_exponent) * w;
    }
    if !total.is_finite() {
        return Err(Error::NonFinite("weighted integral overflowed".into()));
    }
    Ok(total)
}

/// |f(r)/r^k| computed in log space; values below `floor` count as zero.
#[inline]
pub(crate) fn over_rk(v: f64, r: f64, k: u32) -> f64 {
    if k == 0 {
        return v.abs();
    }
    let a = v.abs();
    if a < 1e-300 {
        return 0.0;
    }
    (a.ln() - k as f64 * r.ln()).exp()
}

/// ∫ |f/r^k|^p r^{2k+n−1−β} dr for any p > 0 (no root taken).
pub(crate) fn weighted_power_integral(values: &[f64], grid: &RadialGrid, params: &ModelParams, k: u32, p: f64) -> f64 {
    let e = params.eta_exponent(k);
    let mut total = 0.0;
    for ((r, w), v) in grid.nodes().iter().zip(grid.weights()).zip(values) {
        let a = over_rk(*v, *r, k);
        if a > 0.0 {
            total += (p * a.ln() + e * r.ln()).exp() * w;
        }
    }
    total
}

/// ‖f/r^k‖ in L^p(r^{2k+n−1−β} dr) on raw values; p = ∞ gives the grid max.
pub(crate) fn lp_norm_values(values: &[f64], grid: &RadialGrid, params: &ModelParams, p: f64, k: u32) -> f64 {
    if p.is_infinite() {
        return grid.nodes().iter().zip(values).fold(0.0, |m, (r, v)| m.max(over_rk(*v, *r, k)));
    }
    weighted_power_integral(values, grid, params, k, p).powf(1.0 / p)
}

/// (∫ |f/r^k|^p r^{2k+n−1−β} dr)^{1/p}; for p = ∞ the max of |f/r^k| over the nodes.
pub fn lp_norm_deta(f: &GridFunction, p: f64, k: u32) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidParameter(format!("norm exponent p = {p} must be >= 1")));
    }
    let v = lp_norm_values(f.values(), f.grid(), f.params(), p, k);
    if !v.is_finite() {
        return Err(Error::NonFinite("norm overflowed".into()));
    }
    Ok(v)
}
