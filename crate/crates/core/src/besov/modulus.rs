//! Monte Carlo estimate of the `r`-th modulus of smoothness
//! `w_{r,p}(f, t) = sup_{|h_i| ≤ t_i} ‖Δ_h^r f‖_p`.
//!
//! The supremum runs over a scrambled Sobol set of `2^12` directions in the
//! box `Π [−t_i, t_i]` plus the `2d` axis extremes `±t_i e_i`. The `L^p` norm
//! is a sample mean over seeded uniform points. `Δ_h^r f(x)` is taken as zero
//! whenever `x + r h` leaves the unit cube.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::besov::params::Exponent;
use crate::target::Target;

/// Number of Sobol directions used by [`modulus_of_smoothness`].
pub const SOBOL_DIRECTIONS: u32 = 1 << 12;

/// `C(r, i)`.
fn binomial(r: u32, i: u32) -> f64 {
    (0..i).fold(1.0, |acc, t| acc * (r - t) as f64 / (t + 1) as f64)
}

/// `Δ_h^r f(x)`, or zero when `x + r h ∉ [0,1]^d`.
pub fn finite_difference<T: Target + ?Sized>(f: &T, r: u32, h: &[f64], x: &[f64]) -> f64 {
    let end_inside = x
        .iter()
        .zip(h)
        .all(|(xi, hi)| (0.0..=1.0).contains(&(xi + r as f64 * hi)));
    if !end_inside {
        return 0.0;
    }
    let mut y = x.to_vec();
    let mut total = 0.0;
    for i in 0..=r {
        for ((yi, xi), hi) in y.iter_mut().zip(x).zip(h) {
            *yi = xi + i as f64 * hi;
        }
        let sign = if (r - i) % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * binomial(r, i) * f.eval(&y);
    }
    total
}

/// Directions used for the supremum: Sobol points mapped to `Π [−t_i, t_i]`
/// followed by the axis extremes.
pub fn sobol_directions(t: &[f64], count: u32, seed: u32) -> Vec<Vec<f64>> {
    let d = t.len();
    let mut dirs: Vec<Vec<f64>> = (0..count)
        .map(|idx| {
            (0..d)
                .map(|i| {
                    let u = sobol_burley::sample(idx, i as u32, seed) as f64;
                    t[i] * (2.0 * u - 1.0)
                })
                .collect()
        })
        .collect();
    for i in 0..d {
        for sign in [1.0, -1.0] {
            let mut h = vec![0.0; d];
            h[i] = sign * t[i];
            dirs.push(h);
        }
    }
    dirs
}

/// Seeded uniform evaluation points in `[0,1]^d`.
pub fn uniform_points(d: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..d).map(|_| rng.random::<f64>()).collect())
        .collect()
}

/// `max_h ‖Δ_h^r f‖_p` over explicit directions and points.
pub fn modulus_with_directions<T: Target + ?Sized>(
    f: &T,
    r_order: u32,
    directions: &[Vec<f64>],
    p: Exponent,
    points: &[Vec<f64>],
) -> f64 {
    directions
        .par_iter()
        .map(|h| {
            let diffs = points
                .iter()
                .map(|x| finite_difference(f, r_order, h, x).abs());
            if p.is_infinite() {
                diffs.fold(0.0, f64::max)
            } else {
                let pv = p.value();
                let mean = diffs.map(|v| v.powf(pv)).sum::<f64>() / points.len() as f64;
                mean.powf(1.0 / pv)
            }
        })
        .reduce(|| 0.0, f64::max)
}

/// Monte Carlo modulus of smoothness `w_{r,p}(f, t)`.
pub fn modulus_of_smoothness<T: Target + ?Sized>(
    f: &T,
    r_order: u32,
    t: &[f64],
    p: Exponent,
    n_samples: usize,
    seed: u64,
) -> f64 {
    let directions = sobol_directions(t, SOBOL_DIRECTIONS, seed as u32);
    let points = uniform_points(f.dim(), n_samples, seed);
    modulus_with_directions(f, r_order, &directions, p, &points)
}
