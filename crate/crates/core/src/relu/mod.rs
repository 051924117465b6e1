//! Sparse ReLU networks and explicit approximants of B-spline series.

pub mod budget;
pub mod gadgets;
pub mod matrix;
pub mod network;
pub mod synth;

pub use budget::{budget_certificate, covering_number_bound, BudgetCertificate};
pub use matrix::CsrMatrix;
pub use network::{Layer, NetStats, ReluNetwork};
pub use synth::{
    assemble_approximant, build_bspline_net, clip_output, compose_with_clipping,
    precompose_affine, precomposed_bound, Approximant, BsplineNet,
};
