//! Synthetic regression data `y_i = f(x_i) + ξ_i`, `ξ_i ~ N(0, σ²)`.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::PxSampler;
use crate::target::Target;

/// Noise level used when none is configured.
pub const DEFAULT_SIGMA: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionDataset {
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<f64>,
    pub sigma: f64,
    pub seed: u64,
}

impl RegressionDataset {
    /// Draws `n` points from `sampler` and noisy responses of `f`.
    pub fn generate<T: Target + ?Sized>(
        f: &T,
        n: usize,
        sigma: f64,
        sampler: &PxSampler,
        seed: u64,
    ) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::config(format!("noise level must be >= 0, got {sigma}")));
        }
        sampler.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, sigma).map_err(|e| Error::config(e.to_string()))?;
        let d = f.dim();
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let x = sampler.sample(&mut rng, d);
            let y = f.eval(&x) + noise.sample(&mut rng);
            xs.push(x);
            ys.push(y);
        }
        Ok(Self { xs, ys, sigma, seed })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.xs.first().map_or(0, Vec::len)
    }

    /// `x1,…,xd,y` with a header row.
    pub fn to_csv(&self) -> String {
        let d = self.dim();
        let mut out = (1..=d).map(|i| format!("x{i}")).collect::<Vec<_>>().join(",");
        out.push_str(",y\n");
        for (x, y) in self.xs.iter().zip(&self.ys) {
            for v in x {
                let _ = write!(out, "{v:?},");
            }
            let _ = writeln!(out, "{y:?}");
        }
        out
    }
}
