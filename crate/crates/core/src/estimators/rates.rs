//! Closed-form convergence rates `n^{exponent}` for comparison with measured
//! risks.

use serde::{Deserialize, Serialize};

use crate::besov::params::{positive_part, Exponent};
use crate::bspline::SmoothnessVec;
use crate::error::{Error, Result};

/// Default `κ` in the affine-hull lower bound.
pub const DEFAULT_KAPPA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineRate {
    pub beta_tilde: f64,
    pub exponent: f64,
    /// `n^{exponent}`
    pub rate: f64,
    /// `n^{exponent} · log(n)³`
    pub rate_log3: f64,
}

/// `Σ 1/β_i = 1/β̃`.
fn harmonic(beta: &SmoothnessVec) -> f64 {
    beta.as_slice().iter().map(|b| 1.0 / b).sum()
}

/// `−2β̃/(2β̃+1)` for `β̃ = c/h`, written as `−2c/(2c + h)` so that dyadic
/// inputs give the correctly rounded value.
fn minimax_exponent(c: f64, h: f64) -> f64 {
    -2.0 * c / (2.0 * c + h)
}

fn check_n(n: f64) -> Result<()> {
    if n >= 2.0 && n.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("sample size must be >= 2, got {n}")))
    }
}

/// Rate `n^{−2β̃/(2β̃+1)}` for affine compositions with inner smoothness `β`.
pub fn rate_affine(n: f64, beta: &SmoothnessVec) -> Result<AffineRate> {
    check_n(n)?;
    let h = harmonic(beta);
    let beta_tilde = 1.0 / h;
    let exponent = minimax_exponent(1.0, h);
    let rate = n.powf(exponent);
    Ok(AffineRate {
        beta_tilde,
        exponent,
        rate,
        rate_log3: rate * n.ln().powi(3),
    })
}

/// Exponent `−2β₀/(2β₀+d)` for isotropic smoothness `β₀` in `d` dimensions.
pub fn isotropic_exponent(beta0: f64, d: usize) -> f64 {
    -2.0 * beta0 / (2.0 * beta0 + d as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepRate {
    /// `β̃*^{(ℓ)}` for each stage.
    pub beta_star: Vec<f64>,
    /// Stage attaining the minimum (0-based).
    pub binding: usize,
    pub beta_star_star: f64,
    pub exponent: f64,
    pub rate: f64,
}

/// Rate of the deep composition model with stage smoothness `betas`:
/// `β̃*^{(ℓ)} = β̃^{(ℓ)} Π_{k>ℓ} min(β̲^{(k)} − 1/p + ε, 1)`, and the exponent
/// uses `β̃** = min_ℓ β̃*^{(ℓ)}`.
pub fn rate_deep(n: f64, betas: &[SmoothnessVec], p: Exponent, eps: f64) -> Result<DeepRate> {
    check_n(n)?;
    if betas.is_empty() {
        return Err(Error::config("deep rate needs at least one stage"));
    }
    if !(eps >= 0.0) {
        return Err(Error::config("eps must be non-negative"));
    }
    let inv_p = p.recip();
    for (l, b) in betas.iter().enumerate() {
        if b.beta_tilde() <= inv_p {
            return Err(Error::config(format!(
                "stage {l}: beta_tilde = {} must exceed 1/p = {inv_p}",
                b.beta_tilde()
            )));
        }
    }
    let factors: Vec<f64> = betas
        .iter()
        .map(|b| (b.beta_min() - inv_p + eps).min(1.0))
        .collect();
    let downstream: Vec<f64> = (0..betas.len())
        .map(|l| factors[l + 1..].iter().product::<f64>())
        .collect();
    let h: Vec<f64> = betas.iter().map(harmonic).collect();
    let beta_star: Vec<f64> = downstream.iter().zip(&h).map(|(c, h)| c / h).collect();
    let (binding, &beta_star_star) = beta_star
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    if !(beta_star_star > 0.0) {
        return Err(Error::config(format!(
            "effective smoothness {beta_star_star} is not positive"
        )));
    }
    let exponent = minimax_exponent(downstream[binding], h[binding]);
    Ok(DeepRate {
        beta_star,
        binding,
        beta_star_star,
        exponent,
        rate: n.powf(exponent),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearLowerRate {
    /// `v = 2(1/p − 1/2)_+`
    pub v: f64,
    /// `−(2β̃ − v)/(2β̃ + 1 − v)`
    pub nonadaptive_exponent: f64,
    pub a_d: f64,
    /// `s = β̲ − d̃/p + d/2 + a_d`
    pub s: f64,
    /// `−2s/(2s + d)`
    pub affine_hull_exponent: f64,
    pub nonadaptive_rate: f64,
    pub affine_hull_rate: f64,
}

/// Lower-bound exponents for linear estimators with smoothness `beta` of
/// the inner function.
///
/// `a_d = 1 + κ` when `d̃ < d/2` and `0` otherwise.
#[allow(clippy::too_many_arguments)]
pub fn rate_linear_lower(
    n: f64,
    d: usize,
    d_tilde: usize,
    beta: &SmoothnessVec,
    p: f64,
    kappa: f64,
) -> Result<LinearLowerRate> {
    check_n(n)?;
    if !(p > 0.0 && p <= 2.0) {
        return Err(Error::config(format!("linear lower bound needs 0 < p <= 2, got {p}")));
    }
    if d_tilde == 0 || d_tilde > d {
        return Err(Error::config(format!("need 1 <= d_tilde <= d, got {d_tilde} and {d}")));
    }
    if !(kappa >= 0.0) {
        return Err(Error::config("kappa must be non-negative"));
    }
    let v = 2.0 * positive_part(1.0 / p - 0.5);
    // −(2β̃ − v)/(2β̃ + 1 − v) with β̃ = 1/h
    let h = harmonic(beta);
    let nonadaptive_exponent = -(2.0 - v * h) / (2.0 + h - v * h);
    let df = d as f64;
    let a_d = if (d_tilde as f64) < df / 2.0 { 1.0 + kappa } else { 0.0 };
    let s = beta.beta_min() - d_tilde as f64 / p + df / 2.0 + a_d;
    let affine_hull_exponent = -2.0 * s / (2.0 * s + df);
    Ok(LinearLowerRate {
        v,
        nonadaptive_exponent,
        a_d,
        s,
        affine_hull_exponent,
        nonadaptive_rate: n.powf(nonadaptive_exponent),
        affine_hull_rate: n.powf(affine_hull_exponent),
    })
}
