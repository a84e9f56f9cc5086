//! Parallel transport, holonomy algebra estimation and invariant distributions.

pub mod distribution;
pub mod estimate;
pub mod transport;

pub use distribution::{distribution_parallel_residual, Distribution};
pub use estimate::{
    classify, invariant_subspaces, sample_holonomy, ClassifyOptions, HolonomyClassification, HolonomyEstimate,
    HolonomyLabel, InvariantSplit, LoopFamily,
};
pub use transport::{axis_ray, parallel_transport, transport_matrix, Connection, Path, Piece, TransportOptions};
