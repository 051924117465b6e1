//! Anisotropic B-spline analysis, adaptive sparse approximation, explicit
//! ReLU network synthesis and empirical rate experiments.
//!
//! The crate is organised bottom-up:
//!
//! * [`bspline`] evaluates cardinal B-splines and the anisotropic tensor basis
//!   `M_{k,j}` and enumerates the index sets `J(k)`.
//! * [`besov`] holds the parameter types, sparse coefficient series, the
//!   `b^β_{p,q}` sequence norm, least-squares quasi-interpolation and the
//!   modulus-of-smoothness diagnostic.
//! * [`adaptive`] builds the level/budget schedule and the greedy sparse
//!   approximant.
//! * [`relu`] represents sparse ReLU networks and synthesizes approximants.
//! * [`estimators`] fits series and kernel estimators and evaluates risks.
//! * [`synth`] generates ground-truth targets.
//! * [`harness`] drives reproducible experiments from TOML configs.

pub mod adaptive;
pub mod besov;
pub mod bspline;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod quadrature;
pub mod relu;
pub mod report;
pub mod sampling;
pub mod synth;
pub mod target;

pub use error::{Error, Result};
