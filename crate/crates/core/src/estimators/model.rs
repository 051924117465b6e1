//! Fitted regression models and their empirical risk.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::estimators::kernel::KernelModel;
use crate::estimators::series::{SeriesKind, SeriesModel};
use crate::sampling::PxSampler;
use crate::target::Target;

/// Smallest test sample accepted by [`empirical_risk`].
pub const MIN_TEST_POINTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    AdaptiveSeries,
    NonadaptiveSeries,
    KernelRidge,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::AdaptiveSeries => "adaptive-series",
            ModelKind::NonadaptiveSeries => "nonadaptive-series",
            ModelKind::KernelRidge => "kernel-ridge",
        }
    }
}

/// A clipped regression estimate `x ↦ min(max(f̂(x), −F), F)`.
#[derive(Debug, Clone)]
pub enum FittedModel {
    Series(SeriesModel),
    Kernel(KernelModel),
}

impl From<SeriesModel> for FittedModel {
    fn from(m: SeriesModel) -> Self {
        FittedModel::Series(m)
    }
}

impl From<KernelModel> for FittedModel {
    fn from(m: KernelModel) -> Self {
        FittedModel::Kernel(m)
    }
}

impl FittedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            FittedModel::Series(s) if s.kind == SeriesKind::AdaptiveSeries => ModelKind::AdaptiveSeries,
            FittedModel::Series(_) => ModelKind::NonadaptiveSeries,
            FittedModel::Kernel(_) => ModelKind::KernelRidge,
        }
    }

    pub fn clip(&self) -> f64 {
        match self {
            FittedModel::Series(s) => s.clip,
            FittedModel::Kernel(k) => k.clip,
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            FittedModel::Series(s) => s.predict(x),
            FittedModel::Kernel(k) => k.predict(x),
        }
    }

    /// Number of basis functions or dual weights.
    pub fn size(&self) -> usize {
        match self {
            FittedModel::Series(s) => s.terms(),
            FittedModel::Kernel(k) => k.alpha.len(),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            FittedModel::Series(s) => json!({
                "kind": self.kind().as_str(),
                "clip": s.clip,
                "input_dim": s.input_dim,
                "features": s.features,
                "coefficients": s.coeffs.to_text(),
            }),
            FittedModel::Kernel(k) => json!({
                "kind": self.kind().as_str(),
                "clip": k.clip,
                "kernel": k.family,
                "bandwidth": k.bandwidth,
                "lambda": k.lambda,
                "centers": *k.centers,
                "alpha": k.alpha,
            }),
        }
    }
}

impl Target for FittedModel {
    fn dim(&self) -> usize {
        match self {
            FittedModel::Series(s) => s.input_dim,
            FittedModel::Kernel(k) => k.input_dim(),
        }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.predict(x)
    }
}

/// Monte Carlo estimate of `∫ (f̂ − f)² dP_X`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskEstimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Risk of `model` against `f_true` on `n_test` fresh draws from `sampler`.
pub fn empirical_risk<M: Target + ?Sized, T: Target + ?Sized>(
    model: &M,
    f_true: &T,
    sampler: &PxSampler,
    n_test: usize,
    seed: u64,
) -> Result<RiskEstimate> {
    if n_test < MIN_TEST_POINTS {
        return Err(Error::config(format!(
            "n_test must be at least {MIN_TEST_POINTS}, got {n_test}"
        )));
    }
    if model.dim() != f_true.dim() {
        return Err(Error::Dimension {
            what: "model input",
            expected: f_true.dim(),
            got: model.dim(),
        });
    }
    sampler.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = f_true.dim();
    let xs: Vec<Vec<f64>> = (0..n_test).map(|_| sampler.sample(&mut rng, d)).collect();
    let sq: Vec<f64> = {
        use rayon::prelude::*;
        xs.par_iter()
            .map(|x| (model.eval(x) - f_true.eval(x)).powi(2))
            .collect()
    };
    let n = n_test as f64;
    let mean = sq.iter().sum::<f64>() / n;
    let var = sq.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(RiskEstimate {
        mean,
        stderr: (var / n).sqrt(),
    })
}
