//! Risk-versus-sample-size studies and head-to-head comparisons.
//!
//! Each estimator spec lists a grid of tuning values (levels `K`, or kernel
//! bandwidths and ridge parameters). Every candidate is fitted on the training
//! sample and the one with the smallest risk on an independent tuning sample
//! is kept; its risk on a third, independent test sample is reported.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptive::make_plan;
use crate::besov::coeffs::SeriesBasis;
use crate::besov::params::{BesovParams, Exponent};
use crate::bspline::{SmoothnessVec, SplineOrder};
use crate::error::{Error, Result};
use crate::estimators::dataset::{RegressionDataset, DEFAULT_SIGMA};
use crate::estimators::kernel::{fit_kernel_ridge_path, KernelFamily};
use crate::estimators::model::{empirical_risk, FittedModel, MIN_TEST_POINTS};
use crate::estimators::series::{
    default_ridge, fit_adaptive_series, fit_nonadaptive_series, level_size, FeatureMap,
};
use crate::report::{RatePoint, RateReport};
use crate::sampling::PxSampler;
use crate::target::Target;

fn default_r() -> Exponent {
    Exponent::finite(2.0).expect("2 is a valid exponent")
}

/// An estimator family together with its tuning grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EstimatorSpec {
    AdaptiveSeries {
        beta: SmoothnessVec,
        m: u32,
        p: Exponent,
        #[serde(default = "default_r")]
        r: Exponent,
        levels: Vec<u32>,
        #[serde(default)]
        features: FeatureMap,
        #[serde(default)]
        ridge: Option<f64>,
        #[serde(default)]
        relax_order: bool,
    },
    NonadaptiveSeries {
        beta: SmoothnessVec,
        m: u32,
        levels: Vec<u32>,
        #[serde(default)]
        features: FeatureMap,
        #[serde(default)]
        ridge: Option<f64>,
    },
    KernelRidge {
        kernel: KernelFamily,
        bandwidths: Vec<f64>,
        lambdas: Vec<f64>,
    },
}

impl EstimatorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorSpec::AdaptiveSeries { .. } => "adaptive-series",
            EstimatorSpec::NonadaptiveSeries { .. } => "nonadaptive-series",
            EstimatorSpec::KernelRidge { .. } => "kernel-ridge",
        }
    }

    fn series_basis(beta: &SmoothnessVec, m: u32) -> Result<SeriesBasis> {
        Ok(SeriesBasis::new(beta.clone(), SplineOrder::new(m)?))
    }

    /// Fits every candidate of the grid. Series levels with more basis
    /// functions than data points are skipped.
    pub fn fit_candidates(
        &self,
        data: &RegressionDataset,
        clip: f64,
    ) -> Result<Vec<(String, FittedModel)>> {
        let n = data.len();
        let out: Vec<(String, FittedModel)> = match self {
            EstimatorSpec::AdaptiveSeries {
                beta,
                m,
                p,
                r,
                levels,
                features,
                ridge,
                relax_order,
            } => {
                let order = SplineOrder::new(*m)?;
                let params = if *relax_order {
                    BesovParams::with_relaxed_order(*p, Exponent::INFINITY, *r, beta.clone(), order)?
                } else {
                    BesovParams::new(*p, Exponent::INFINITY, *r, beta.clone(), order)?
                };
                let basis = params.basis();
                let ridge = ridge.unwrap_or_else(|| default_ridge(n));
                let mut out = Vec::new();
                for &k in levels {
                    if level_size(&basis, k)? > n {
                        continue;
                    }
                    let plan = make_plan(k, &params)?;
                    let model = fit_adaptive_series(data, &basis, features, &plan, clip, ridge)?;
                    out.push((format!("K={k}"), model.into()));
                }
                out
            }
            EstimatorSpec::NonadaptiveSeries {
                beta,
                m,
                levels,
                features,
                ridge,
            } => {
                let basis = Self::series_basis(beta, *m)?;
                let ridge = ridge.unwrap_or_else(|| default_ridge(n));
                let mut out = Vec::new();
                for &k in levels {
                    if level_size(&basis, k)? > n {
                        continue;
                    }
                    let model = fit_nonadaptive_series(data, &basis, features, k, clip, ridge)?;
                    out.push((format!("K={k}"), model.into()));
                }
                out
            }
            EstimatorSpec::KernelRidge {
                kernel,
                bandwidths,
                lambdas,
            } => {
                let mut out = Vec::new();
                for &h in bandwidths {
                    for model in fit_kernel_ridge_path(data, *kernel, h, lambdas, clip)? {
                        out.push((format!("h={h},lambda={}", model.lambda), model.into()));
                    }
                }
                out
            }
        };
        if out.is_empty() {
            return Err(Error::config(format!(
                "{}: no tuning candidate fits n = {n} points",
                self.name()
            )));
        }
        Ok(out)
    }
}

/// Shared settings of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyOptions {
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Number of seed replicates per sample size.
    pub seeds: u32,
    pub base_seed: u64,
    #[serde(default)]
    pub sampler: PxSampler,
    /// Clip level `F`.
    pub clip: f64,
    #[serde(default = "default_test")]
    pub n_tune: usize,
    #[serde(default = "default_test")]
    pub n_test: usize,
}

fn default_sigma() -> f64 {
    DEFAULT_SIGMA
}

fn default_test() -> usize {
    20_000
}

/// One fitted replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub estimator: String,
    pub n: usize,
    pub replicate: u32,
    pub seed: u64,
    pub selected: String,
    pub size: usize,
    pub risk: f64,
    pub risk_stderr: f64,
}

/// Data seed for replicate `rep` at sample size `n`.
pub fn replicate_seed(base: u64, rep: u32, n: usize) -> u64 {
    (base ^ rep as u64) ^ (n as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

const TUNE_SALT: u64 = 0x5555_5555_5555_5555;
const TEST_SALT: u64 = 0xaaaa_aaaa_aaaa_aaaa;

/// Fits the candidates of `spec` and keeps the one with the smallest tuning risk.
pub fn fit_selected<T: Target + ?Sized>(
    spec: &EstimatorSpec,
    f: &T,
    data: &RegressionDataset,
    opts: &StudyOptions,
) -> Result<(String, FittedModel)> {
    let mut best: Option<(f64, String, FittedModel)> = None;
    for (label, model) in spec.fit_candidates(data, opts.clip)? {
        let risk = empirical_risk(&model, f, &opts.sampler, opts.n_tune, data.seed ^ TUNE_SALT)?;
        if best.as_ref().is_none_or(|b| risk.mean < b.0) {
            best = Some((risk.mean, label, model));
        }
    }
    let (_, label, model) = best.expect("fit_candidates returns at least one model");
    Ok((label, model))
}

fn run_one<T: Target + ?Sized>(
    spec: &EstimatorSpec,
    f: &T,
    n: usize,
    rep: u32,
    opts: &StudyOptions,
) -> Result<RunRecord> {
    let seed = replicate_seed(opts.base_seed, rep, n);
    let data = RegressionDataset::generate(f, n, opts.sigma, &opts.sampler, seed)?;
    let (selected, model) = fit_selected(spec, f, &data, opts)?;
    let risk = empirical_risk(&model, f, &opts.sampler, opts.n_test, seed ^ TEST_SALT)?;
    Ok(RunRecord {
        estimator: spec.name().into(),
        n,
        replicate: rep,
        seed,
        selected,
        size: model.size(),
        risk: risk.mean,
        risk_stderr: risk.stderr,
    })
}

fn check_options(opts: &StudyOptions) -> Result<()> {
    opts.sampler.validate()?;
    if opts.n_test < MIN_TEST_POINTS || opts.n_tune < MIN_TEST_POINTS {
        return Err(Error::config(format!(
            "n_tune and n_test must be at least {MIN_TEST_POINTS}"
        )));
    }
    if !(opts.clip > 0.0) {
        return Err(Error::config("clip level F must be positive"));
    }
    Ok(())
}

/// Result of [`estimation_rate_study`].
#[derive(Debug, Clone)]
pub struct StudyResult {
    pub report: RateReport,
    pub runs: Vec<RunRecord>,
}

/// Mean risk over seeds at each `n`, and the log-log slope against `n`.
pub fn estimation_rate_study<T: Target + ?Sized>(
    f: &T,
    spec: &EstimatorSpec,
    n_list: &[usize],
    opts: &StudyOptions,
    theory: &str,
    exponent_theory: f64,
) -> Result<StudyResult> {
    if n_list.len() < 4 {
        return Err(Error::config("an estimation study needs at least 4 sample sizes"));
    }
    if opts.seeds < 3 {
        return Err(Error::config("an estimation study needs at least 3 seeds"));
    }
    check_options(opts)?;
    let jobs: Vec<(usize, u32)> = n_list
        .iter()
        .flat_map(|&n| (0..opts.seeds).map(move |rep| (n, rep)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(n, rep)| run_one(spec, f, n, rep, opts))
        .collect::<Result<Vec<_>>>()?;
    let points = n_list
        .iter()
        .map(|&n| {
            let risks: Vec<f64> = runs.iter().filter(|r| r.n == n).map(|r| r.risk).collect();
            let k = risks.len() as f64;
            let mean = risks.iter().sum::<f64>() / k;
            let var = risks.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (k - 1.0);
            RatePoint {
                budget: n as f64,
                error: mean,
                stderr: Some((var / k).sqrt()),
            }
        })
        .collect();
    let report = RateReport::build("est-rate", theory, exponent_theory, points, opts.base_seed)?;
    Ok(StudyResult { report, runs })
}

/// Paired comparison of several estimators on shared datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub n: usize,
    pub estimators: Vec<String>,
    /// `runs[e][rep]`.
    pub runs: Vec<Vec<RunRecord>>,
    pub means: Vec<f64>,
    /// For each estimator after the first, the seeds where the first has
    /// strictly smaller risk.
    pub first_wins: Vec<usize>,
}

fn equal_budget_fit(
    spec: &EstimatorSpec,
    data: &RegressionDataset,
    budget: usize,
    clip: f64,
) -> Result<Option<(String, FittedModel)>> {
    let EstimatorSpec::NonadaptiveSeries {
        beta,
        m,
        levels,
        features,
        ridge,
    } = spec
    else {
        return Ok(None);
    };
    let basis = EstimatorSpec::series_basis(beta, *m)?;
    let mut sorted = levels.clone();
    sorted.sort_unstable();
    let mut chosen = None;
    for k in sorted {
        if level_size(&basis, k)? >= budget {
            chosen = Some(k);
            break;
        }
    }
    let k = chosen.ok_or_else(|| {
        Error::config(format!(
            "no listed level reaches the budget of {budget} basis functions"
        ))
    })?;
    let ridge = ridge.unwrap_or_else(|| default_ridge(data.len()));
    let model = fit_nonadaptive_series(data, &basis, features, k, clip, ridge)?;
    Ok(Some((format!("K={k}"), FittedModel::from(model))))
}

/// Fits every spec on the same `opts.seeds` datasets of size `n`.
///
/// With `equal_budget`, each non-adaptive spec after the first is fitted at
/// the smallest listed level whose basis count is at least the size of the
/// selected first model, instead of being tuned.
pub fn compare<T: Target + ?Sized>(
    f: &T,
    specs: &[EstimatorSpec],
    n: usize,
    opts: &StudyOptions,
    equal_budget: bool,
) -> Result<Comparison> {
    check_options(opts)?;
    if specs.len() < 2 {
        return Err(Error::config("a comparison needs at least 2 estimators"));
    }
    if opts.seeds == 0 {
        return Err(Error::config("a comparison needs at least one seed"));
    }
    let per_seed = (0..opts.seeds)
        .into_par_iter()
        .map(|rep| -> Result<Vec<RunRecord>> {
            let seed = replicate_seed(opts.base_seed, rep, n);
            let data = RegressionDataset::generate(f, n, opts.sigma, &opts.sampler, seed)?;
            let mut budget = 0;
            let mut out = Vec::with_capacity(specs.len());
            for (e, spec) in specs.iter().enumerate() {
                let fixed = if equal_budget && e > 0 {
                    equal_budget_fit(spec, &data, budget, opts.clip)?
                } else {
                    None
                };
                let (selected, model) = match fixed {
                    Some(fit) => fit,
                    None => fit_selected(spec, f, &data, opts)?,
                };
                if e == 0 {
                    budget = model.size();
                }
                let risk = empirical_risk(&model, f, &opts.sampler, opts.n_test, seed ^ TEST_SALT)?;
                out.push(RunRecord {
                    estimator: spec.name().into(),
                    n,
                    replicate: rep,
                    seed,
                    selected,
                    size: model.size(),
                    risk: risk.mean,
                    risk_stderr: risk.stderr,
                });
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let runs: Vec<Vec<RunRecord>> = (0..specs.len())
        .map(|e| per_seed.iter().map(|r| r[e].clone()).collect())
        .collect();
    let means = runs
        .iter()
        .map(|r| r.iter().map(|x| x.risk).sum::<f64>() / r.len() as f64)
        .collect();
    let first_wins = runs[1..]
        .iter()
        .map(|other| runs[0].iter().zip(other).filter(|(a, b)| a.risk < b.risk).count())
        .collect();
    Ok(Comparison {
        n,
        estimators: specs.iter().map(|s| s.name().to_string()).collect(),
        runs,
        means,
        first_wins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_from_toml() {
        let spec: EstimatorSpec = toml::from_str(
            r#"
            kind = "adaptive-series"
            beta = [1.0, 4.0]
            m = 5
            p = 2.0
            levels = [1, 2, 3]
            "#,
        )
        .unwrap();
        assert_eq!(spec.name(), "adaptive-series");
        let k: EstimatorSpec = toml::from_str(
            "kind = \"kernel-ridge\"\nkernel = \"matern15\"\nbandwidths = [0.1]\nlambdas = [1e-3]",
        )
        .unwrap();
        assert_eq!(k.name(), "kernel-ridge");
    }

    #[test]
    fn seeds_differ_by_replicate_and_size() {
        let a = replicate_seed(7, 0, 256);
        assert_ne!(a, replicate_seed(7, 1, 256));
        assert_ne!(a, replicate_seed(7, 0, 512));
    }
}
