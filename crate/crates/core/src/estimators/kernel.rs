//! Kernel ridge regression baseline.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::dataset::RegressionDataset;

/// Radial kernel families, scaled by a bandwidth `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    /// `exp(−r²/(2h²))`
    Gaussian,
    Matern05,
    Matern15,
    Matern25,
}

impl KernelFamily {
    pub fn eval(self, r: f64, h: f64) -> f64 {
        let s = r / h;
        match self {
            KernelFamily::Gaussian => (-0.5 * s * s).exp(),
            KernelFamily::Matern05 => (-s).exp(),
            KernelFamily::Matern15 => {
                let t = 3f64.sqrt() * s;
                (1.0 + t) * (-t).exp()
            }
            KernelFamily::Matern25 => {
                let t = 5f64.sqrt() * s;
                (1.0 + t + t * t / 3.0) * (-t).exp()
            }
        }
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// `f̂(x) = Σ α_i k(x, x_i)`, clipped at `±clip`.
#[derive(Debug, Clone)]
pub struct KernelModel {
    pub family: KernelFamily,
    pub bandwidth: f64,
    pub lambda: f64,
    pub clip: f64,
    pub centers: Arc<Vec<Vec<f64>>>,
    pub alpha: Vec<f64>,
}

impl KernelModel {
    pub fn raw(&self, x: &[f64]) -> f64 {
        self.centers
            .iter()
            .zip(&self.alpha)
            .map(|(c, a)| a * self.family.eval(distance(x, c), self.bandwidth))
            .sum()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.raw(x).clamp(-self.clip, self.clip)
    }

    pub fn input_dim(&self) -> usize {
        self.centers.first().map_or(0, Vec::len)
    }
}

fn gram(xs: &[Vec<f64>], family: KernelFamily, h: f64) -> DMatrix<f64> {
    let n = xs.len();
    DMatrix::from_fn(n, n, |i, j| family.eval(distance(&xs[i], &xs[j]), h))
}

fn check(data: &RegressionDataset, h: f64, clip: f64) -> Result<()> {
    if data.is_empty() {
        return Err(Error::config("empty dataset"));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::config(format!("bandwidth must be positive, got {h}")));
    }
    if !(clip > 0.0) {
        return Err(Error::config("clip level F must be positive"));
    }
    Ok(())
}

/// Solves `(K + λI) α = y` by Cholesky.
pub fn fit_kernel_ridge(
    data: &RegressionDataset,
    family: KernelFamily,
    bandwidth: f64,
    lambda: f64,
    clip: f64,
) -> Result<KernelModel> {
    check(data, bandwidth, clip)?;
    if !(lambda > 0.0) {
        return Err(Error::config("lambda must be positive"));
    }
    let mut k = gram(&data.xs, family, bandwidth);
    for i in 0..data.len() {
        k[(i, i)] += lambda;
    }
    let chol = k
        .cholesky()
        .ok_or_else(|| Error::Numerical(format!("kernel Gram factorization failed (lambda = {lambda:e})")))?;
    let alpha = chol.solve(&DVector::from_column_slice(&data.ys));
    Ok(KernelModel {
        family,
        bandwidth,
        lambda,
        clip,
        centers: Arc::new(data.xs.clone()),
        alpha: alpha.iter().copied().collect(),
    })
}

/// One fit per `λ` in `lambdas`, sharing a single eigendecomposition of the
/// Gram matrix.
pub fn fit_kernel_ridge_path(
    data: &RegressionDataset,
    family: KernelFamily,
    bandwidth: f64,
    lambdas: &[f64],
    clip: f64,
) -> Result<Vec<KernelModel>> {
    check(data, bandwidth, clip)?;
    if lambdas.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::config("lambda grid must be positive"));
    }
    let eig = gram(&data.xs, family, bandwidth).symmetric_eigen();
    let qty = eig.eigenvectors.transpose() * DVector::from_column_slice(&data.ys);
    let centers = Arc::new(data.xs.clone());
    lambdas
        .iter()
        .map(|&lambda| {
            let scaled = DVector::from_iterator(
                qty.len(),
                qty.iter()
                    .zip(eig.eigenvalues.iter())
                    .map(|(c, ev)| c / (ev.max(0.0) + lambda)),
            );
            let alpha = &eig.eigenvectors * scaled;
            if alpha.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical("non-finite kernel ridge weights".into()));
            }
            Ok(KernelModel {
                family,
                bandwidth,
                lambda,
                clip,
                centers: centers.clone(),
                alpha: alpha.iter().copied().collect(),
            })
        })
        .collect()
}
