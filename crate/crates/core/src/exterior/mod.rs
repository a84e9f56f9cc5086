//! Differential forms: pointwise algebra, form fields and differential operators.

pub mod field;
pub mod form;
pub mod ops;

pub use field::{Codiff, ExtD, FlatOf, FormField, FormFn, FormJet, Hodge, Wedge, Weighted};
pub use form::{flat, sharp, Form};
pub use ops::{
    basic_residual, codifferential, codifferential_hodge, conformal_form_transport, covariant_derivative,
    distribution_volume_form, exterior_derivative, hodge_star, twistor_killing_residual, FirstOrder,
    TransportResidual, TwistorResidual,
};
