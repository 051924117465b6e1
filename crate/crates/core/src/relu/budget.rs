//! Architecture budgets for series approximants and the covering-number
//! bound of sparse ReLU classes.

use serde::{Deserialize, Serialize};

use crate::besov::params::{extended_real, positive_part, BesovParams};
use crate::error::{Error, Result};

/// `⌈log₂ n⌉` for `n ≥ 1`.
pub fn ceil_log2(n: u64) -> u64 {
    assert!(n >= 1);
    u64::from(64 - (n - 1).leading_zeros()) * u64::from(n > 1)
}

/// Width of one B-spline gadget, `W_0 = 6dm(m+2) + 2d`.
pub fn gadget_width(d: u64, m: u64) -> u64 {
    6 * d * m * (m + 2) + 2 * d
}

/// Depth `3 + 2⌈log₂(3^{d∨m}/(ε c)) + 5⌉⌈log₂(d∨m)⌉`.
pub fn gadget_depth(d: u64, m: u64, eps: f64, c: f64) -> u64 {
    let dm = d.max(m);
    let inner = (dm as f64 * 3f64.log2() - eps.log2() - c.log2() + 5.0).ceil();
    3 + 2 * inner.max(0.0) as u64 * ceil_log2(dm)
}

/// Budget `(L_1, W_1, S_1, B_1)` of a network approximant with `N` bases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetCertificate {
    #[serde(rename = "N")]
    pub n: u64,
    pub d: u64,
    pub m: u64,
    /// `ε = N^{−β̃} / log N`.
    pub eps: f64,
    /// Constant inside the depth formula.
    pub c: f64,
    pub w0: u64,
    pub l1: u64,
    pub w1: u64,
    /// `[(L_1 − 1) W_0² + 1] N`
    pub s1: u64,
    /// `d (1 + 1/ν) (1/p − β̃)_+`
    pub b1_exponent: f64,
    #[serde(with = "extended_real")]
    pub nu: f64,
    /// `N^{b1_exponent}` with the unknown constant set to 1.
    pub b1: f64,
    /// `B_1` is known only up to a constant factor.
    pub b1_order_only: bool,
}

/// Evaluates the budget for `N` bases; `c` is the constant of the depth
/// formula (1 when unknown).
pub fn budget_certificate(n: u64, params: &BesovParams, c: f64) -> Result<BudgetCertificate> {
    if n < 2 {
        return Err(Error::config(format!("N must be at least 2, got {n}")));
    }
    if !(c > 0.0) {
        return Err(Error::config("depth constant c must be positive"));
    }
    let d = params.dim() as u64;
    let m = u64::from(params.m.get());
    let beta_tilde = params.beta.beta_tilde();
    let nf = n as f64;
    let eps = nf.powf(-beta_tilde) / nf.ln();
    let w0 = gadget_width(d, m);
    let l1 = gadget_depth(d, m, eps, c);
    let nu = params.nu();
    let b1_exponent = d as f64 * (1.0 + 1.0 / nu) * positive_part(params.p.recip() - beta_tilde);
    let s1 = (l1 - 1)
        .checked_mul(w0 * w0)
        .and_then(|v| v.checked_add(1))
        .and_then(|v| v.checked_mul(n))
        .ok_or_else(|| Error::config("S1 overflows"))?;
    Ok(BudgetCertificate {
        n,
        d,
        m,
        eps,
        c,
        w0,
        l1,
        w1: n * w0,
        s1,
        b1_exponent,
        nu,
        b1: nf.powf(b1_exponent),
        b1_order_only: true,
    })
}

/// `2 S L log((B ∨ 1)(W + 1)) + S log(L/δ)`, an upper bound on the log
/// covering number of `Φ(L, W, S, B)` at scale `δ` in sup norm.
pub fn covering_number_bound(l: u64, w: u64, s: u64, b: f64, delta: f64) -> Result<f64> {
    if l == 0 || w == 0 || !(b > 0.0) {
        return Err(Error::config("L, W and B must be positive"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::config(format!("delta must lie in (0, 1), got {delta}")));
    }
    let (lf, wf, sf) = (l as f64, w as f64, s as f64);
    Ok(2.0 * sf * lf * (b.max(1.0) * (wf + 1.0)).ln() + sf * (lf / delta).ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log2_ceiling() {
        let cases = [(1, 0), (2, 1), (3, 2), (4, 2), (5, 3), (1024, 10), (1025, 11)];
        for (n, want) in cases {
            assert_eq!(ceil_log2(n), want, "n = {n}");
        }
    }

    #[test]
    fn covering_examples() {
        assert_eq!(covering_number_bound(3, 4, 0, 2.0, 0.1).unwrap(), 0.0);
        let v = covering_number_bound(1, 1, 1, 1.0, (-1.0f64).exp()).unwrap();
        assert!((v - (2.0 * 2f64.ln() + 1.0)).abs() < 1e-15);
        assert!(covering_number_bound(1, 1, 1, 1.0, 1.0).is_err());
    }

    #[test]
    fn width_example() {
        assert_eq!(gadget_width(1, 2), 50);
    }
}
