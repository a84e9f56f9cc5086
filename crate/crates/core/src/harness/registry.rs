//! The table of checks: identifiers, anchor strings and default tolerances.

use serde::Serialize;

use crate::chart::Backend;

/// Whether a residual must stay below or rise above its threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sense {
    AtMost,
    AtLeast,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CheckInfo {
    pub id: &'static str,
    pub anchor: &'static str,
    pub sense: Sense,
    pub tol_dual: f64,
    pub tol_fd: f64,
}

impl CheckInfo {
    pub fn tol(&self, backend: Backend) -> f64 {
        match backend {
            Backend::Dual => self.tol_dual,
            Backend::Fd => self.tol_fd,
        }
    }

    pub fn passes(&self, residual: f64, tol: f64) -> bool {
        match self.sense {
            Sense::AtMost => residual <= tol,
            Sense::AtLeast => residual > tol,
        }
    }
}

const fn at_most(id: &'static str, anchor: &'static str, tol_dual: f64, tol_fd: f64) -> CheckInfo {
    CheckInfo { id, anchor, sense: Sense::AtMost, tol_dual, tol_fd }
}

const fn at_least(id: &'static str, anchor: &'static str, tol: f64) -> CheckInfo {
    CheckInfo { id, anchor, sense: Sense::AtLeast, tol_dual: tol, tol_fd: tol }
}

pub const REGISTRY: &[CheckInfo] = &[
    at_most("chart.backend-agreement", "dual and finite-difference jets agree", 1e-6, 1e-6),
    at_most("chart.torus-divergence", "integral of a Laplacian over a closed chart", 1e-10, 1e-6),
    at_most("curvature.riemann-symmetries", "algebraic symmetries of the curvature tensor", 1e-10, 1e-6),
    at_most("conformal.connection-law", "Levi-Civita connection under conformal change", 1e-6, 1e-4),
    at_most("conformal.trace-free-ricci-law", "trace-free Ricci tensor under conformal change", 1e-6, 1e-4),
    at_most("conformal.scalar-law", "scalar curvature under conformal change", 1e-6, 1e-4),
    at_most("conformal.parallel-field-scalar", "scalar curvature in presence of a parallel unit field", 1e-6, 1e-4),
    at_least("conformal.non-parallel-detected", "rejection of a non-parallel candidate field", 1e-6),
    at_most("conformal.einstein-trace-free-ricci", "Einstein condition for the rescaled metric", 1e-5, 1e-3),
    at_most("conformal.einstein-divergence-form", "Einstein condition rewritten through the Hessian", 1e-5, 1e-3),
    at_most("conformal.gradient-field-conformal", "conformal vector field from the conformal factor", 1e-6, 1e-4),
    at_least("conformal.gradient-field-non-killing", "that conformal field is not Killing", 1e-2),
    at_most("exterior.transport-d", "exterior derivative of a rescaled form", 1e-6, 1e-4),
    at_most("exterior.transport-nabla", "covariant derivative of a rescaled form", 1e-6, 1e-4),
    at_most("exterior.transport-delta", "codifferential of a rescaled form", 1e-6, 1e-4),
    at_most("exterior.twistor-preserved", "conformal weight of the twistor operator", 1e-6, 1e-4),
    at_most("exterior.parallel-form-twistor", "rescaled parallel forms are conformal Killing", 1e-6, 1e-4),
    at_most("exterior.hodge-involution", "Hodge star squared", 1e-9, 1e-9),
    at_most("exterior.hodge-wedge-interior", "Hodge star exchanges wedge and interior product", 1e-9, 1e-9),
    at_most("exterior.codifferential-routes", "frame and Hodge formulas for the codifferential", 1e-8, 1e-5),
    at_most("holonomy.flat-trivial", "flat metrics have trivial restricted holonomy", 0.0, 0.0),
    at_most("holonomy.sphere-area", "rotation angle around a loop equals enclosed curvature", 1e-3, 1e-3),
    at_most("holonomy.metric-preservation", "parallel transport is an isometry", 1e-6, 1e-6),
    at_most("holonomy.block-leakage", "product metrics have block transports", 1e-6, 1e-6),
    at_most("holonomy.curvature-span", "curvature operators lie in the holonomy algebra", 0.0, 0.0),
    at_most("holonomy.label", "holonomy classification label", 0.0, 0.0),
    at_most("warped.conjugate-identity", "rescaled triple warped product with swapped factors", 0.0, 0.0),
    at_most("warped.parallel-t1", "first factor is parallel for the warped metric", 1e-8, 1e-6),
    at_most("warped.parallel-t3", "third factor is parallel for the rescaled metric", 1e-8, 1e-6),
    at_most("warped.reducible", "both metrics of a triple warped pair are reducible", 0.0, 0.0),
    at_most("warped.reconstruction", "reassembly from recovered factors", 1e-10, 1e-10),
    at_most("warped.round-trip", "recovered factors equal the construction data", 1e-10, 1e-10),
    at_most("warped.route-agreement", "two expressions for the middle factor agree", 1e-10, 1e-10),
    at_least("warped.middle-positive", "recovered middle factor is positive definite", 1e-8),
    at_most("warped.alignment", "warping gradient lies in the first two factors", 1e-10, 1e-8),
    at_most("warped.detected-split", "recovery from holonomy-detected factors", 1e-5, 1e-5),
];

pub fn lookup(id: &str) -> Option<&'static CheckInfo> {
    REGISTRY.iter().find(|c| c.id == id)
}

/// `id → anchor` lines, one per registered check.
pub fn concordance_text() -> String {
    let width = REGISTRY.iter().map(|c| c.id.len()).max().unwrap_or(0);
    let mut out = String::new();
    for c in REGISTRY {
        out.push_str(&format!("{:<width$}  {}\n", c.id, c.anchor));
    }
    out
}

pub fn concordance_json() -> String {
    serde_json::to_string_pretty(REGISTRY).expect("registry serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn ids_are_unique_and_anchored() {
        let ids: BTreeSet<&str> = REGISTRY.iter().map(|c| c.id).collect();
        assert_eq!(ids.len(), REGISTRY.len());
        assert!(REGISTRY.iter().all(|c| !c.anchor.trim().is_empty()));
        assert_eq!(concordance_text().lines().count(), REGISTRY.len());
    }
}
