//! JSON run configuration. Every block is optional; command-line flags override it.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::{self, Deserializer, Visitor};
use serde::Deserialize;

use betahankel::hankel::{GridSizing, TransformPlan};
use betahankel::kernels::GaussianFamily;
use betahankel::{Error, GridFunction, ModelParams, Result};

/// A Lebesgue exponent: a number, or "inf".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponent(pub f64);

pub fn parse_exponent(s: &str) -> std::result::Result<f64, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "∞" => Ok(f64::INFINITY),
        t => match t.split_once('/') {
            Some((a, b)) => {
                let (a, b) = (a.trim().parse::<f64>(), b.trim().parse::<f64>());
                match (a, b) {
                    (Ok(a), Ok(b)) if b != 0.0 => Ok(a / b),
                    _ => Err(format!("bad exponent '{s}'")),
                }
            }
            None => t.parse::<f64>().map_err(|e| format!("bad exponent '{s}': {e}")),
        },
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Exponent;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Exponent, E> {
                Ok(Exponent(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Exponent, E> {
                Ok(Exponent(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Exponent, E> {
                Ok(Exponent(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Exponent, E> {
                parse_exponent(v).map(Exponent).map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelBlock,
    pub grid: GridBlock,
    pub data: Option<DataSpec>,
    pub evolution: EvolutionBlock,
    /// explicit (m, p, q) list; m defaults to the admissible relation
    pub triplets: Vec<TripletSpec>,
    /// lattice such as "q=2,p=2..6"
    pub triplet_lattice: Option<String>,
    pub verify: VerifyBlock,
    pub decay_fit: DecayBlock,
    pub young: YoungBlock,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelBlock {
    pub n: Option<u32>,
    pub beta: Option<f64>,
    pub k: Option<u32>,
}

impl ModelBlock {
    pub fn params(&self) -> Result<ModelParams> {
        betahankel::derive_params(self.n.unwrap_or(3), self.beta.unwrap_or(1.0), self.k.unwrap_or(0))
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridBlock {
    pub order: Option<usize>,
    pub nodes_per_period: Option<f64>,
    pub tail: Option<f64>,
    /// smallest and largest Gaussian scales to resolve
    pub tau_min: Option<f64>,
    pub tau_max: Option<f64>,
    /// explicit truncation radii; override the scales
    pub r_max: Option<f64>,
    pub rho_max: Option<f64>,
}

impl GridBlock {
    pub fn sizing(&self) -> GridSizing {
        let d = GridSizing::default();
        GridSizing {
            order: self.order.unwrap_or(d.order),
            nodes_per_period: self.nodes_per_period.unwrap_or(d.nodes_per_period),
            tail: self.tail.unwrap_or(d.tail),
            ..d
        }
    }

    /// Explicit radii when both are given, else scales (falling back to the given defaults).
    pub fn plan(&self, params: ModelParams, tau_min: f64, tau_max: f64) -> Result<TransformPlan> {
        let sizing = self.sizing();
        match (self.r_max, self.rho_max) {
            (Some(r), Some(rho)) => TransformPlan::for_extents(params, r, rho, &sizing),
            (None, None) => {
                TransformPlan::for_scales(params, self.tau_min.unwrap_or(tau_min), self.tau_max.unwrap_or(tau_max), &sizing)
            }
            _ => Err(Error::InvalidParameter("grid.r_max and grid.rho_max must be given together".into())),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    /// amplitude · r^k exp(−r^{2−β}/((2−β)² scale))
    Gaussian { scale: f64, amplitude: f64 },
    /// amplitude · r^k exp(−(r/width)^power)
    Bump { amplitude: f64, width: f64, power: f64 },
    Zero,
}

impl Default for DataSpec {
    fn default() -> Self {
        DataSpec::Gaussian { scale: 1.0, amplitude: 1.0 }
    }
}

impl DataSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        match *self {
            DataSpec::Gaussian { scale, amplitude } => {
                if !(scale > 0.0 && scale.is_finite() && amplitude.is_finite()) {
                    return bad("gaussian data needs a positive scale and a finite amplitude");
                }
            }
            DataSpec::Bump { amplitude, width, power } => {
                if !(width > 0.0 && power > 0.0 && amplitude.is_finite() && width.is_finite() && power.is_finite()) {
                    return bad("bump data needs positive width and power and a finite amplitude");
                }
            }
            DataSpec::Zero => {}
        }
        Ok(())
    }

    /// Scale range the data itself needs resolved.
    pub fn scale_hint(&self) -> f64 {
        match *self {
            DataSpec::Gaussian { scale, .. } => scale,
            _ => 1.0,
        }
    }

    pub fn sample(&self, plan: &TransformPlan) -> Result<GridFunction> {
        let p = *plan.params();
        match *self {
            DataSpec::Gaussian { scale, amplitude } => {
                let fam = GaussianFamily::new(scale, amplitude);
                plan.physical_fn(|r| fam.physical(r, &p))
            }
            DataSpec::Bump { amplitude, width, power } => {
                plan.physical_fn(|r| amplitude * r.powi(p.k as i32) * (-(r / width).powf(power)).exp())
            }
            DataSpec::Zero => plan.physical_fn(|_| 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SignArg {
    #[default]
    Focusing,
    Defocusing,
}

impl From<SignArg> for betahankel::Sign {
    fn from(s: SignArg) -> Self {
        match s {
            SignArg::Focusing => betahankel::Sign::Focusing,
            SignArg::Defocusing => betahankel::Sign::Defocusing,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionBlock {
    pub t_end: Option<f64>,
    pub steps: Option<usize>,
    pub b: Option<f64>,
    pub sign: Option<SignArg>,
    pub q: Option<Exponent>,
    pub picard_tol: Option<f64>,
    pub picard_max_iter: Option<usize>,
    pub blowup_threshold: Option<f64>,
    pub substeps: Option<usize>,
    pub max_halvings: Option<u32>,
    pub max_windows: Option<usize>,
    pub fail_on_blowup: Option<bool>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripletSpec {
    #[serde(default)]
    pub m: Option<Exponent>,
    pub p: Exponent,
    pub q: Exponent,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyBlock {
    pub suites: Vec<String>,
    pub seed: Option<u64>,
    pub young_pairs: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecayBlock {
    pub p: Vec<Exponent>,
    pub scale: Option<f64>,
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct YoungBlock {
    pub pairs: Option<usize>,
    pub seed: Option<u64>,
    pub triples: Vec<[Exponent; 3]>,
}

/// Expands "q=2,p=2..6" style lattices. Each axis is a value, a list "a;b;c",
/// or an integer range "a..b" (optionally "a..b/step"). Returns (m, p, q) with m
/// left unset when the lattice has no m axis.
pub fn expand_lattice(spec: &str) -> Result<Vec<(Option<f64>, f64, f64)>> {
    let bad = |m: String| Error::InvalidParameter(format!("triplet lattice '{spec}': {m}"));
    let mut ms: Option<Vec<f64>> = None;
    let mut ps: Option<Vec<f64>> = None;
    let mut qs: Option<Vec<f64>> = None;
    for part in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (key, val) = part.split_once('=').ok_or_else(|| bad(format!("'{part}' is not key=value")))?;
        let values = axis_values(val).map_err(bad)?;
        let slot = match key.trim() {
            "m" => &mut ms,
            "p" => &mut ps,
            "q" => &mut qs,
            other => return Err(bad(format!("unknown axis '{other}'"))),
        };
        if slot.replace(values).is_some() {
            return Err(bad(format!("axis '{}' given twice", key.trim())));
        }
    }
    let ps = ps.ok_or_else(|| bad("missing p axis".into()))?;
    let qs = qs.ok_or_else(|| bad("missing q axis".into()))?;
    let ms: Vec<Option<f64>> = ms.map(|v| v.into_iter().map(Some).collect()).unwrap_or_else(|| vec![None]);
    let mut out = Vec::new();
    for &q in &qs {
        for &p in &ps {
            for &m in &ms {
                out.push((m, p, q));
            }
        }
    }
    Ok(out)
}

fn axis_values(val: &str) -> std::result::Result<Vec<f64>, String> {
    let val = val.trim();
    if let Some((a, rest)) = val.split_once("..") {
        let (b, step) = match rest.split_once('/') {
            Some((b, s)) => (b, s.trim().parse::<f64>().map_err(|e| format!("bad step '{s}': {e}"))?),
            None => (rest, 1.0),
        };
        let a = parse_exponent(a)?;
        let b = parse_exponent(b)?;
        if !(step > 0.0 && a.is_finite() && b.is_finite() && b >= a) {
            return Err(format!("range '{val}' needs finite a <= b and a positive step"));
        }
        let count = ((b - a) / step + 1e-9).floor() as usize + 1;
        if count > 10_000 {
            return Err(format!("range '{val}' has too many points"));
        }
        return Ok((0..count).map(|i| a + step * i as f64).collect());
    }
    val.split(';').map(parse_exponent).collect()
}
