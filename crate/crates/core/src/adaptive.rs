//! Adaptive sparse approximation.
//!
//! Given a base level `K`, the approximant keeps every coefficient with
//! `k ≤ K` and, on each finer level `K < k ≤ K*`, only the `n_k`
//! coefficients of largest magnitude, where
//!
//! ```text
//! δ = (1/p − 1/r)_+,   ν = (β̃ − δ)/(2δ),   K* = ⌈K(1 + 1/ν)⌉,
//! n_k = ⌈2^{‖K‖ − ν(‖k‖ − ‖K‖)}⌉,          N = 2^{‖K‖}.
//! ```
//!
//! When `p ≥ r` the tail is empty and the approximant is plain truncation.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::besov::coeffs::SparseCoeffs;
use crate::besov::params::{extended_real, BesovParams, Exponent};
use crate::bspline::{ceil_exact, level_norm};
use crate::error::{Error, Result};
use crate::quadrature::{lr_norm, NormEstimate, QuadratureSpec};
use crate::report::{RatePoint, RateReport};
use crate::target::{Difference, Target};

/// Budget `n_k` of one tail level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelBudget {
    pub k: u32,
    pub n_k: u64,
}

/// Level and budget schedule of the adaptive approximant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptivePlan {
    #[serde(rename = "K")]
    pub k: u32,
    pub delta: f64,
    #[serde(with = "extended_real")]
    pub nu: f64,
    #[serde(rename = "K_star")]
    pub k_star: u32,
    /// `‖K‖_{β̲/β}`.
    pub level_norm: u64,
    /// Tail budgets for `K < k ≤ K*`, increasing in `k`.
    pub budgets: Vec<LevelBudget>,
    #[serde(rename = "N")]
    pub n_total: u64,
}

impl AdaptivePlan {
    pub fn has_tail(&self) -> bool {
        !self.budgets.is_empty()
    }

    pub fn budget(&self, k: u32) -> Option<u64> {
        self.budgets.iter().find(|b| b.k == k).map(|b| b.n_k)
    }
}

/// Builds the schedule for base level `k`.
pub fn make_plan(k: u32, params: &BesovParams) -> Result<AdaptivePlan> {
    let delta = params.delta();
    let beta = &params.beta;
    if beta.beta_tilde() <= delta {
        return Err(Error::config(format!(
            "inadmissible parameters: beta_tilde = {} must exceed delta = {delta}",
            beta.beta_tilde()
        )));
    }
    let nu = params.nu();
    let k_star = if nu.is_infinite() {
        k
    } else {
        let ks = ceil_exact(k as f64 * (1.0 + 1.0 / nu));
        u32::try_from(ks).map_err(|_| Error::config(format!("K* = {ks} out of range")))?
    };
    let norm_k = level_norm(k, beta);
    if norm_k >= 63 {
        return Err(Error::config(format!(
            "level norm {norm_k} at K = {k} overflows the budget counter"
        )));
    }
    let budgets = (k + 1..=k_star)
        .map(|level| {
            let excess = level_norm(level, beta) as f64 - norm_k as f64;
            let n_k = ceil_exact((norm_k as f64 - nu * excess).exp2()).max(1) as u64;
            LevelBudget { k: level, n_k }
        })
        .collect();
    Ok(AdaptivePlan {
        k,
        delta,
        nu,
        k_star,
        level_norm: norm_k,
        budgets,
        n_total: 1u64 << norm_k,
    })
}

/// Orders entries by decreasing `|α|`, then lexicographically by `j`.
fn by_magnitude(a: &(&Vec<i64>, f64), b: &(&Vec<i64>, f64)) -> Ordering {
    b.1.abs()
        .total_cmp(&a.1.abs())
        .then_with(|| a.0.cmp(b.0))
}

/// The adaptive approximant `f_N` of a coefficient set under `plan`.
pub fn adaptive_approximate(coeffs: &SparseCoeffs, plan: &AdaptivePlan) -> SparseCoeffs {
    let mut out = coeffs.truncated(plan.k);
    for budget in &plan.budgets {
        let mut entries: Vec<(&Vec<i64>, f64)> =
            coeffs.level(budget.k).filter(|(_, a)| *a != 0.0).collect();
        entries.sort_by(by_magnitude);
        for (j, a) in entries.into_iter().take(budget.n_k as usize) {
            out.insert(budget.k, j.clone(), a)
                .expect("entry copied from a valid coefficient set");
        }
    }
    out
}

/// `‖f_true − Σ α M‖_{L^r}` under the given quadrature.
pub fn approximation_error<T: Target + ?Sized>(
    f_true: &T,
    coeffs: &SparseCoeffs,
    r: Exponent,
    quad: &QuadratureSpec,
) -> Result<NormEstimate> {
    if f_true.dim() != coeffs.basis().dim() {
        return Err(Error::Dimension {
            what: "approximation target",
            expected: coeffs.basis().dim(),
            got: f_true.dim(),
        });
    }
    let approx = coeffs.evaluator()?;
    lr_norm(&Difference(f_true, &approx), r, quad)
}

/// Measures `‖f − f_N‖_{L^r}` for each base level in `k_list` and fits the
/// log-log slope against `N`. The error is the norm of the dropped part of
/// the target series, evaluated exactly as a series.
pub fn approximation_rate_study(
    target: &SparseCoeffs,
    k_list: &[u32],
    params: &BesovParams,
    quad: &QuadratureSpec,
    seed: u64,
) -> Result<RateReport> {
    if target.basis() != &params.basis() {
        return Err(Error::config("target series and parameters use different bases"));
    }
    let results: Vec<Result<(AdaptivePlan, RatePoint)>> = k_list
        .par_iter()
        .map(|&k| {
            let plan = make_plan(k, params)?;
            let approx = adaptive_approximate(target, &plan);
            let tail = target.difference(&approx)?;
            let err = lr_norm(&tail.evaluator()?, params.r, quad)?;
            let point = RatePoint {
                budget: plan.n_total as f64,
                error: err.value,
                stderr: (err.stderr > 0.0).then_some(err.stderr),
            };
            Ok((plan, point))
        })
        .collect();
    let mut plans = Vec::with_capacity(results.len());
    let mut points = Vec::with_capacity(results.len());
    for r in results {
        let (plan, point) = r?;
        plans.push(plan);
        points.push(point);
    }
    let beta_tilde = params.beta.beta_tilde();
    let mut report = RateReport::build(
        "approx-rate",
        "adaptive approximation error ~ N^(-beta_tilde)",
        -beta_tilde,
        points,
        seed,
    )?;
    if plans.iter().all(|p| !p.has_tail()) {
        report.note("non-adaptive regime: delta = 0, the plan has no adaptive tail");
    }
    if params.order_relaxed {
        report.note("spline order condition relaxed");
    }
    Ok(report)
}
