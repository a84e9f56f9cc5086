//! Scenario runner behind the `confgeom` command line tool.
//!
//! A scenario is a JSON document ([`ScenarioConfig`]) naming a metric family,
//! optional conformal factor, fields and the checks to run. [`run_scenario`]
//! resolves it, runs the checks and returns a [`Report`] whose JSON rendering
//! depends only on the scenario and seed.

pub mod checks;
pub mod config;
pub mod registry;
pub mod report;

use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::chart::Backend;

pub use config::{resolve, ScenarioConfig, Setup};
pub use registry::{concordance_json, concordance_text, lookup, CheckInfo, Sense, REGISTRY};
pub use report::{emit_report, Format, Record, Report, Summary};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("internal error: {0}")]
    Internal(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Io(_) => 2,
            HarnessError::Internal(_) => 3,
        }
    }
}

/// Run-time overrides from the command line.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunOptions {
    pub backend: Option<Backend>,
    pub seed: Option<u64>,
    pub tol_scale: Option<f64>,
}

pub fn run_scenario(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<Report, HarnessError> {
    let scale = opts.tol_scale.unwrap_or(1.0);
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(HarnessError::Config("tolerance scale must be positive".into()));
    }
    let setup = resolve(cfg, opts.backend, opts.seed)?;
    let mut infos = Vec::with_capacity(setup.cfg.checks.len());
    for id in &setup.cfg.checks {
        let info = lookup(id).ok_or_else(|| HarnessError::Config(format!("unknown check {id}")))?;
        checks::validate(&setup, id)?;
        infos.push(info);
    }
    for k in setup.cfg.tolerances.keys() {
        if lookup(k).is_none() {
            return Err(HarnessError::Config(format!("tolerance override for unknown check {k}")));
        }
    }
    let records: Vec<Record> = infos
        .par_iter()
        .map(|info| {
            let base = setup.cfg.tolerances.get(info.id).copied().unwrap_or(info.tol(setup.backend));
            let tol = match info.sense {
                Sense::AtMost => base * scale,
                Sense::AtLeast => base,
            };
            let start = Instant::now();
            let out = checks::run(&setup, info.id);
            let wall_time = start.elapsed().as_secs_f64();
            match out {
                Ok(r) => Record {
                    id: info.id.to_string(),
                    anchor: info.anchor.to_string(),
                    residual: Some(r),
                    tol,
                    pass: info.passes(r, tol),
                    error: None,
                    wall_time,
                },
                Err(e) => Record {
                    id: info.id.to_string(),
                    anchor: info.anchor.to_string(),
                    residual: None,
                    tol,
                    pass: false,
                    error: Some(e.to_string()),
                    wall_time,
                },
            }
        })
        .collect();
    Ok(Report::new(&setup.cfg.name, setup.cfg.seed, setup.backend, records))
}

/// Built-in scenarios, by name.
pub const BUILTIN: &[(&str, &str)] = &[
    ("chart-backends", include_str!("../../scenarios/chart-backends.json")),
    ("conformal-identities-n3", include_str!("../../scenarios/conformal-identities-n3.json")),
    ("einstein-pair-mobius", include_str!("../../scenarios/einstein-pair-mobius.json")),
    ("parallel-field-obstruction", include_str!("../../scenarios/parallel-field-obstruction.json")),
    ("twistor-transport", include_str!("../../scenarios/twistor-transport.json")),
    ("hodge-identities", include_str!("../../scenarios/hodge-identities.json")),
    ("holonomy-flat-torus", include_str!("../../scenarios/holonomy-flat-torus.json")),
    ("holonomy-sphere", include_str!("../../scenarios/holonomy-sphere.json")),
    ("holonomy-product", include_str!("../../scenarios/holonomy-product.json")),
    ("triple-warped-roundtrip", include_str!("../../scenarios/triple-warped-roundtrip.json")),
];

pub fn builtin(name: &str) -> Option<ScenarioConfig> {
    BUILTIN
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, src)| ScenarioConfig::from_json(src).expect("built-in scenarios parse"))
}

/// Load a scenario from a built-in name or a JSON file path.
pub fn load(arg: &str) -> Result<ScenarioConfig, HarnessError> {
    if let Some(cfg) = builtin(arg) {
        return Ok(cfg);
    }
    let src = std::fs::read_to_string(arg)?;
    ScenarioConfig::from_json(&src)
}

/// Exit status for a finished report.
pub fn report_exit_code(report: &Report) -> i32 {
    if report.all_passed() {
        0
    } else {
        1
    }
}
