//! `L^r([0,1]^d)` norms by tensor Gauss–Legendre or seeded Monte Carlo.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::besov::params::Exponent;
use crate::error::{Error, Result};
use crate::target::Target;

/// How integrals over `[0,1]^d` are approximated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum QuadratureSpec {
    /// Composite Gauss–Legendre rule with `cells` equal cells per axis and
    /// `points` nodes per cell. Exact for piecewise polynomials of degree
    /// `< 2·points` whose breakpoints lie on the cell grid.
    Grid { cells: usize, points: usize },
    /// Mean over `n` uniform points drawn from a ChaCha stream seeded by `seed`.
    MonteCarlo { n: usize, seed: u64 },
}

impl QuadratureSpec {
    /// Default rule for dimension `d`: a `256^d` grid for `d ≤ 2`, otherwise
    /// `10^5` Monte Carlo points.
    pub fn default_for(d: usize, seed: u64) -> Self {
        if d <= 2 {
            QuadratureSpec::Grid {
                cells: 64,
                points: 4,
            }
        } else {
            QuadratureSpec::MonteCarlo { n: 100_000, seed }
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        match *self {
            QuadratureSpec::Grid { cells, points } => {
                if cells == 0 || points == 0 {
                    return Err(Error::config("grid quadrature needs cells, points >= 1"));
                }
                let per_axis = (cells * points) as f64;
                if per_axis.powi(d as i32) > 1e8 {
                    return Err(Error::config(format!(
                        "grid quadrature with {} nodes per axis is too large in d = {d}; use monte-carlo",
                        cells * points
                    )));
                }
            }
            QuadratureSpec::MonteCarlo { n, .. } => {
                if n < 2 {
                    return Err(Error::config("monte-carlo quadrature needs n >= 2"));
                }
            }
        }
        Ok(())
    }

    /// Nodes and weights (weights sum to 1).
    pub fn nodes(&self, d: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        match *self {
            QuadratureSpec::Grid { cells, points } => {
                let (gx, gw) = gauss_legendre(points);
                let h = 1.0 / cells as f64;
                let mut ax = Vec::with_capacity(cells * points);
                let mut aw = Vec::with_capacity(cells * points);
                for c in 0..cells {
                    for (x, w) in gx.iter().zip(&gw) {
                        ax.push((c as f64 + 0.5 * (x + 1.0)) * h);
                        aw.push(0.5 * w * h);
                    }
                }
                let per = ax.len();
                let total = per.pow(d as u32);
                let mut xs = Vec::with_capacity(total);
                let mut ws = Vec::with_capacity(total);
                for mut idx in 0..total {
                    let mut x = vec![0.0; d];
                    let mut w = 1.0;
                    for i in (0..d).rev() {
                        x[i] = ax[idx % per];
                        w *= aw[idx % per];
                        idx /= per;
                    }
                    xs.push(x);
                    ws.push(w);
                }
                (xs, ws)
            }
            QuadratureSpec::MonteCarlo { n, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let xs = (0..n)
                    .map(|_| (0..d).map(|_| rng.random::<f64>()).collect())
                    .collect();
                (xs, vec![1.0 / n as f64; n])
            }
        }
    }
}

/// A norm estimate with its Monte Carlo standard error (zero for grids).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    pub stderr: f64,
}

/// `‖f‖_{L^r([0,1]^d)}`; `r = ∞` gives the maximum over the nodes.
pub fn lr_norm<T: Target + ?Sized>(f: &T, r: Exponent, spec: &QuadratureSpec) -> Result<NormEstimate> {
    let d = f.dim();
    spec.validate(d)?;
    let (xs, ws) = spec.nodes(d);
    let vals: Vec<f64> = xs.par_iter().map(|x| f.eval(x).abs()).collect();
    if r.is_infinite() {
        return Ok(NormEstimate {
            value: vals.iter().copied().fold(0.0, f64::max),
            stderr: 0.0,
        });
    }
    let rv = r.value();
    let powered: Vec<f64> = vals.iter().map(|v| v.powf(rv)).collect();
    let integral: f64 = powered.iter().zip(&ws).map(|(v, w)| v * w).sum();
    let value = integral.powf(1.0 / rv);
    let stderr = match spec {
        QuadratureSpec::Grid { .. } => 0.0,
        QuadratureSpec::MonteCarlo { n, .. } => {
            let n = *n as f64;
            let var = powered.iter().map(|v| (v - integral).powi(2)).sum::<f64>() / (n - 1.0);
            let se_integral = (var / n).sqrt();
            // delta method for I^{1/r}
            if integral > 0.0 {
                se_integral * integral.powf(1.0 / rv - 1.0) / rv
            } else {
                0.0
            }
        }
    };
    Ok(NormEstimate { value, stderr })
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        dp = if d != 0.0 { d } else { dp };
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// `(P_n(z), P_n′(z))`.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::target::{Constant, FnTarget};

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in 1..10 {
            let (x, w) = gauss_legendre(n);
            for deg in 0..2 * n {
                let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((approx - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn constant_norms() {
        let one = Constant { dim: 2, value: 1.0 };
        for spec in [
            QuadratureSpec::Grid { cells: 3, points: 2 },
            QuadratureSpec::MonteCarlo { n: 100, seed: 1 },
        ] {
            for r in [1.0, 2.0, 3.5] {
                let v = lr_norm(&one, Exponent::new(r).unwrap(), &spec).unwrap().value;
                assert!((v - 1.0).abs() < 1e-12);
            }
            let v = lr_norm(&one, Exponent::INFINITY, &spec).unwrap().value;
            assert_eq!(v, 1.0);
        }
    }

    #[test]
    fn grid_l2_of_linear() {
        let f = FnTarget::new(1, |x: &[f64]| x[0]);
        let v = lr_norm(&f, Exponent::new(2.0).unwrap(), &QuadratureSpec::Grid { cells: 1, points: 2 })
            .unwrap()
            .value;
        assert!((v - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}
