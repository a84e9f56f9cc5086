//! Numerical conformal geometry on coordinate charts: curvature, conformal rescaling,
//! differential forms, holonomy and triple warped products.

pub mod chart;
pub mod conformal;
pub mod curvature;
pub mod dual;
pub mod error;
pub mod expr;
pub mod harness;
pub mod exterior;
pub mod holonomy;
pub mod linalg;
pub mod samples;
pub mod scalar;
pub mod warped;
