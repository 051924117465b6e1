//! Besov parameters, coefficient series and analysis operators.

pub mod coeffs;
pub mod modulus;
pub mod params;
pub mod projection;

pub use coeffs::{level_weight, sequence_norm, SeriesBasis, SeriesEvaluator, SparseCoeffs};
pub use modulus::{modulus_of_smoothness, modulus_with_directions};
pub use params::{positive_part, BesovParams, Exponent};
pub use projection::{quasi_project, telescoped_coeffs, Projector};
