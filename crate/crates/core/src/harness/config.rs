//! Scenario files and their resolution into concrete fields.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chart::{Backend, ChartDomain, ScalarField};
use crate::conformal::{rescale, ConformalPair};
use crate::curvature::MetricField;
use crate::expr::{default_names, parse, Expr};
use crate::exterior::FormField;
use crate::exterior::form::binom;
use crate::holonomy::HolonomyLabel;
use crate::samples::random_metric;
use crate::warped::{build, Factor, TripleWarpedPair, TripleWarpedSpec};

use super::HarnessError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    #[serde(default)]
    pub periodic: Option<Vec<bool>>,
    #[serde(default)]
    pub grid_res: Option<usize>,
}

impl ChartSpec {
    pub fn domain(&self) -> Result<ChartDomain, HarnessError> {
        let n = self.lo.len();
        let periodic = self.periodic.clone().unwrap_or_else(|| vec![false; n]);
        let res = self.grid_res.unwrap_or(4);
        ChartDomain::new(self.lo.clone(), self.hi.clone(), periodic, vec![res; n]).map_err(|e| HarnessError::Config(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MetricSpec {
    Flat,
    RoundSphere,
    Diagonal { entries: Vec<String> },
    Components { rows: Vec<Vec<String>> },
    /// A seeded random metric on the chart.
    Random,
    /// Flat metric with `e^{−φ} = ‖x‖² + c`.
    Mobius { c: f64 },
    /// Flat factors of the given dimensions on `[-half, half]` boxes.
    TripleWarped { dims: [usize; 3], phi: String, #[serde(default = "one")] half: f64 },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormSpec {
    pub degree: usize,
    pub coeffs: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Number of random samples per dimension.
    pub count: usize,
    pub dims: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopSpec {
    #[serde(default = "four")]
    pub extra: usize,
}

fn four() -> usize {
    4
}

impl Default for LoopSpec {
    fn default() -> Self {
        LoopSpec { extra: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub backend: Backend,
    #[serde(default)]
    pub chart: Option<ChartSpec>,
    pub metric: MetricSpec,
    /// Coordinate names used by expressions (default `x, y, z, w` or `x0, x1, …`).
    #[serde(default)]
    pub names: Option<Vec<String>>,
    #[serde(default)]
    pub phi: Option<String>,
    #[serde(default)]
    pub parallel_field: Option<Vec<String>>,
    #[serde(default)]
    pub perturbed_field: Option<Vec<String>>,
    #[serde(default)]
    pub forms: Vec<FormSpec>,
    #[serde(default)]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub base_point: Option<Vec<f64>>,
    #[serde(default)]
    pub loops: LoopSpec,
    /// Sizes of the coordinate blocks of a product metric.
    #[serde(default)]
    pub blocks: Option<Vec<usize>>,
    #[serde(default)]
    pub expect_label: Option<HolonomyLabel>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub checks: Vec<String>,
}

impl ScenarioConfig {
    pub fn from_json(src: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(src).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

/// A scenario with all expressions parsed and fields built.
#[derive(Clone, Debug)]
pub struct Setup {
    pub cfg: ScenarioConfig,
    pub backend: Backend,
    pub metric: MetricField,
    pub phi: Option<ScalarField>,
    pub warped: Option<TripleWarpedPair>,
    pub parallel_field: Option<Vec<Expr>>,
    pub perturbed_field: Option<Vec<Expr>>,
    pub forms: Vec<FormField>,
    pub points: Vec<Vec<f64>>,
    pub base: Vec<f64>,
}

impl Setup {
    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn pair(&self) -> Option<ConformalPair> {
        let phi = self.phi.as_ref()?;
        rescale(&self.metric, phi).ok()
    }

    pub fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.cfg.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ salt)
    }
}

fn cfg_err(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Config(e.to_string())
}

fn parse_all(src: &[String], names: &[String]) -> Result<Vec<Expr>, HarnessError> {
    src.iter().map(|s| parse(s, names).map_err(cfg_err)).collect()
}

/// Default sample points: the chart centre and points a quarter of the way towards two corners.
fn default_points(dom: &ChartDomain) -> Vec<Vec<f64>> {
    let c = dom.center();
    let towards = |t: f64| -> Vec<f64> {
        (0..dom.dim())
            .map(|i| {
                let end = if i % 2 == 0 { dom.hi()[i] } else { dom.lo()[i] };
                c[i] + t * (end - c[i])
            })
            .collect()
    };
    vec![c.clone(), towards(0.25), towards(-0.3)]
}

pub fn resolve(cfg: &ScenarioConfig, backend: Option<Backend>, seed: Option<u64>) -> Result<Setup, HarnessError> {
    let mut cfg = cfg.clone();
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let backend = backend.unwrap_or(cfg.backend);
    for (k, v) in &cfg.tolerances {
        if !(*v > 0.0) {
            return Err(HarnessError::Config(format!("tolerance for {k} must be positive")));
        }
    }
    let mut phi_override = None;
    let mut warped = None;
    let metric = match &cfg.metric {
        MetricSpec::TripleWarped { dims, phi, half } => {
            let names = cfg.names.clone().unwrap_or_else(|| vec!["t".into(), "s".into()]);
            let phi2 = parse(phi, &names).map_err(cfg_err)?;
            let spec = TripleWarpedSpec {
                factors: dims.map(|n| Factor::flat_box(n, *half)),
                phi: phi2,
                grid_res: cfg.chart.as_ref().and_then(|c| c.grid_res).unwrap_or(4),
            };
            let pair = build(&spec).map_err(cfg_err)?;
            phi_override = Some(pair.phi.clone());
            let g = pair.g.clone();
            warped = Some(pair);
            g
        }
        other => {
            let dom = cfg.chart.as_ref().ok_or_else(|| cfg_err("a chart is required for this metric family"))?.domain()?;
            let n = dom.dim();
            let names = cfg.names.clone().unwrap_or_else(|| default_names(n));
            if names.len() != n {
                return Err(cfg_err(format!("{} coordinate names for a {n}-dimensional chart", names.len())));
            }
            match other {
                MetricSpec::Flat => MetricField::flat(dom),
                MetricSpec::RoundSphere => MetricField::round_sphere(dom).map_err(cfg_err)?,
                MetricSpec::Diagonal { entries } => {
                    MetricField::diagonal(dom, parse_all(entries, &names)?).map_err(cfg_err)?
                }
                MetricSpec::Components { rows } => {
                    let rows = rows.iter().map(|r| parse_all(r, &names)).collect::<Result<Vec<_>, _>>()?;
                    MetricField::new(dom, rows).map_err(cfg_err)?
                }
                MetricSpec::Random => random_metric(&mut ChaCha8Rng::seed_from_u64(cfg.seed), dom).map_err(cfg_err)?,
                MetricSpec::Mobius { c } => {
                    if !(*c > 0.0) {
                        return Err(cfg_err("the Möbius constant must be positive"));
                    }
                    phi_override = Some(ScalarField::new(Expr::neg(Expr::ln(Expr::add(Expr::norm2(0..n), Expr::c(*c))))));
                    MetricField::flat(dom)
                }
                MetricSpec::TripleWarped { .. } => unreachable!("handled above"),
            }
        }
    };
    let n = metric.dim();
    let names = match &cfg.metric {
        MetricSpec::TripleWarped { .. } => default_names(n),
        _ => cfg.names.clone().unwrap_or_else(|| default_names(n)),
    };
    let phi = match (&cfg.phi, phi_override) {
        (Some(_), Some(_)) => return Err(cfg_err("this metric family fixes the conformal factor")),
        (Some(src), None) => Some(ScalarField::new(parse(src, &names).map_err(cfg_err)?)),
        (None, p) => p,
    };
    let field = |f: &Option<Vec<String>>| -> Result<Option<Vec<Expr>>, HarnessError> {
        match f {
            Some(v) if v.len() != n => Err(cfg_err(format!("vector field needs {n} components"))),
            Some(v) => Ok(Some(parse_all(v, &names)?)),
            None => Ok(None),
        }
    };
    let parallel_field = field(&cfg.parallel_field)?;
    let perturbed_field = field(&cfg.perturbed_field)?;
    let forms = cfg
        .forms
        .iter()
        .map(|f| {
            if f.coeffs.len() != binom(n, f.degree) {
                return Err(cfg_err(format!("a {}-form needs {} coefficients", f.degree, binom(n, f.degree))));
            }
            FormField::new(n, f.degree, parse_all(&f.coeffs, &names)?).map_err(cfg_err)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let dom = metric.dom().clone();
    let points = cfg.points.clone().unwrap_or_else(|| default_points(&dom));
    for p in &points {
        if !dom.contains(p) {
            return Err(cfg_err(format!("sample point {p:?} lies outside the chart")));
        }
    }
    let base = cfg.base_point.clone().unwrap_or_else(|| dom.center());
    if !dom.contains(&base) {
        return Err(cfg_err("base point lies outside the chart"));
    }
    if let Some(b) = &cfg.blocks {
        if b.iter().sum::<usize>() != n || b.contains(&0) {
            return Err(cfg_err("block sizes must be positive and add up to the dimension"));
        }
    }
    Ok(Setup { cfg, backend, metric, phi, warped, parallel_field, perturbed_field, forms, points, base })
}
