//! Regression estimators on synthetic data and their risks.

pub mod dataset;
pub mod kernel;
pub mod model;
pub mod rates;
pub mod series;
pub mod study;

pub use dataset::{RegressionDataset, DEFAULT_SIGMA};
pub use kernel::{fit_kernel_ridge, fit_kernel_ridge_path, KernelFamily, KernelModel};
pub use model::{empirical_risk, FittedModel, ModelKind, RiskEstimate, MIN_TEST_POINTS};
pub use rates::{
    isotropic_exponent, rate_affine, rate_deep, rate_linear_lower, AffineRate, DeepRate,
    LinearLowerRate, DEFAULT_KAPPA,
};
pub use series::{
    default_ridge, fit_adaptive_series, fit_nonadaptive_series, level_size, FeatureMap,
    SeriesKind, SeriesModel,
};
pub use study::{
    compare, estimation_rate_study, fit_selected, replicate_seed, Comparison, EstimatorSpec,
    RunRecord, StudyOptions, StudyResult,
};
