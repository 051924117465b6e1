//! Network approximants of B-spline bases and series.

use rayon::prelude::*;

use crate::besov::coeffs::SparseCoeffs;
use crate::bspline::{eval_tensor_basis, LevelLocation, SmoothnessVec, SplineOrder};
use crate::error::{Error, Result};
use crate::relu::gadgets::{clip_symmetric, clip_unit, min_pair, min_tree, multiply_error, product_tree};
use crate::relu::matrix::CsrMatrix;
use crate::relu::network::ReluNetwork;

/// Largest `d·m` accepted by [`build_bspline_net`].
pub const MAX_DM: u32 = 64;

/// Number of Sobol points used to verify gadgets with `d > 3`.
pub const SOBOL_VERIFY_POINTS: usize = 100_000;

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Weights of the truncated-power form
/// `N_m(x) = Σ_{i=0}^{m} c_i (x − i)_+^m`, `c_i = (−1)^i C(m+1, i)/m!`.
fn truncated_power_weights(m: u32) -> Vec<f64> {
    (0..=m)
        .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 } * binomial(m + 1, i) / factorial(m))
        .collect()
}

/// Network for `x ↦ N_m(x)` on `[0, m+1]`, with inputs scaled to
/// `u_i = (x−i)_+/(m+1)` and `u_i^m` by a product tree. Exact for `m = 1`.
fn bspline_1d(m: u32, steps: u32) -> ReluNetwork {
    let mu = m as usize;
    let shifts = CsrMatrix::from_triplets(mu + 1, 1, (0..=mu).map(|i| (i, 0, 1.0)));
    let shift_bias: Vec<f64> = (0..=m).map(|i| -f64::from(i)).collect();
    let first = ReluNetwork::affine(shifts, shift_bias);
    let weights = truncated_power_weights(m);
    if m == 1 {
        let out = CsrMatrix::from_triplets(1, 2, weights.iter().enumerate().map(|(i, &w)| (0, i, w)));
        return first.then_relu(&ReluNetwork::affine(out, vec![0.0]));
    }
    let scale = f64::from(m + 1);
    let fan = CsrMatrix::from_triplets(
        (mu + 1) * mu,
        mu + 1,
        (0..=mu).flat_map(|i| (0..mu).map(move |c| (i * mu + c, i, 1.0 / scale))),
    );
    let power = product_tree(mu, steps);
    let powers: Vec<ReluNetwork> = (0..=mu).map(|_| power.clone()).collect();
    let amp = scale.powi(m as i32);
    let out = CsrMatrix::from_triplets(
        1,
        mu + 1,
        weights.iter().enumerate().map(|(i, &w)| (0, i, w * amp)),
    );
    first
        .then_relu(&ReluNetwork::affine(fan, vec![0.0; (mu + 1) * mu]))
        .then(&ReluNetwork::stack(&powers))
        .then(&ReluNetwork::affine(out, vec![0.0]))
}

/// A priori error of the tensor gadget before the envelope.
fn tensor_error_bound(m: u32, d: usize, steps: u32) -> f64 {
    let e = multiply_error(steps);
    let one_d = if m == 1 {
        0.0
    } else {
        let amp = f64::from(m + 1).powi(m as i32);
        let weight_sum: f64 = truncated_power_weights(m).iter().map(|w| w.abs() * amp).sum();
        weight_sum * (m - 1) as f64 * e
    };
    d as f64 * one_d + (d.saturating_sub(1)) as f64 * e
}

/// `x ↦ min(1, x_i, m+1−x_i : i)`, which dominates `Π N_m(x_i)` and is
/// negative off `[0, m+1]^d`.
fn envelope(m: u32, d: usize) -> ReluNetwork {
    let top = f64::from(m + 1);
    let mut t = Vec::new();
    let mut b = vec![1.0];
    for i in 0..d {
        t.push((1 + 2 * i, i, 1.0));
        t.push((2 + 2 * i, i, -1.0));
        b.extend([0.0, top]);
    }
    ReluNetwork::affine(CsrMatrix::from_triplets(2 * d + 1, d, t), b).then(&min_tree(2 * d + 1))
}

/// A verified network approximation of `M^d_{0,0}(x) = Π N_m(x_i)`.
#[derive(Debug, Clone)]
pub struct BsplineNet {
    pub net: ReluNetwork,
    pub m: SplineOrder,
    pub d: usize,
    pub eps: f64,
    /// Number of tooth compositions in each squaring gadget.
    pub squaring_steps: u32,
    pub error_bound: f64,
    pub measured_error: f64,
    pub verification_points: usize,
}

/// Verification points: a `64^d` grid of `[0, m+1]^d` together with a
/// `32^d` grid of `[−1, m+2]^d` for `d ≤ 3`, otherwise Sobol points on
/// `[−1, m+2]^d`.
pub fn verification_points(m: u32, d: usize) -> Vec<Vec<f64>> {
    let top = f64::from(m + 1);
    let grid = |n: usize, lo: f64, hi: f64| -> Vec<Vec<f64>> {
        let total = n.pow(d as u32);
        (0..total)
            .map(|mut idx| {
                let mut x = vec![0.0; d];
                for i in (0..d).rev() {
                    x[i] = lo + (hi - lo) * (idx % n) as f64 / (n - 1) as f64;
                    idx /= n;
                }
                x
            })
            .collect()
    };
    if d <= 3 {
        let mut pts = grid(64, 0.0, top);
        pts.extend(grid(32, -1.0, top + 1.0));
        pts
    } else {
        (0..SOBOL_VERIFY_POINTS as u32)
            .map(|i| {
                (0..d as u32)
                    .map(|k| -1.0 + (top + 2.0) * f64::from(sobol_burley::sample(i, k, 0x5eed)))
                    .collect()
            })
            .collect()
    }
}

/// Largest `|net(x) − target(x)|` over `points`, with the worst point.
/// Points outside `[0, m+1]^d` must give exactly 0.
fn verify(net: &ReluNetwork, m: SplineOrder, points: &[Vec<f64>]) -> (f64, Vec<f64>, Option<Vec<f64>>) {
    let top = f64::from(m.get() + 1);
    let d = net.input_dim();
    let origin = LevelLocation::new(0, vec![0; d]);
    let beta = SmoothnessVec::isotropic(1.0, d).expect("valid smoothness");
    let results: Vec<(f64, bool)> = points
        .par_iter()
        .map(|x| {
            let y = net.eval_scalar(x);
            let outside = x.iter().any(|&v| v < 0.0 || v > top);
            let exact = eval_tensor_basis(&origin, &beta, m, x).expect("valid location");
            ((y - exact).abs(), outside && y != 0.0)
        })
        .collect();
    let mut worst = 0.0;
    let mut worst_at = points.first().cloned().unwrap_or_default();
    let mut leak = None;
    for (x, (err, leaked)) in points.iter().zip(results) {
        if err > worst {
            worst = err;
            worst_at = x.clone();
        }
        if leaked && leak.is_none() {
            leak = Some(x.clone());
        }
    }
    (worst, worst_at, leak)
}

/// Builds and verifies a network `Ṁ` with `sup |M^d_{0,0} − Ṁ| ≤ eps` that
/// vanishes off `[0, m+1]^d`.
pub fn build_bspline_net(m: SplineOrder, d: usize, eps: f64) -> Result<BsplineNet> {
    if m.get() == 0 {
        return Err(Error::config("the B-spline gadget needs m >= 1"));
    }
    if d == 0 || d as u32 * m.get() > MAX_DM {
        return Err(Error::config(format!("d*m must be in 1..={MAX_DM}")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::config(format!("eps must lie in (0, 1), got {eps}")));
    }
    let mu = m.get();
    let mut steps = 0;
    while tensor_error_bound(mu, d, steps) > eps {
        steps += 1;
    }
    let factors: Vec<ReluNetwork> = (0..d).map(|_| bspline_1d(mu, steps)).collect();
    let mut tensor = ReluNetwork::stack(&factors);
    if d > 1 {
        tensor = tensor.then(&product_tree(d, steps));
    }
    let env = envelope(mu, d);
    // min(η(A), η(E)) where A approximates the product and E is the envelope
    let net = ReluNetwork::parallel(&[tensor, env]).then_relu(&min_pair());
    let points = verification_points(mu, d);
    let (measured, worst_at, leak) = verify(&net, m, &points);
    if let Some(point) = leak {
        return Err(Error::Verification {
            measured: net.eval_scalar(&point).abs(),
            tolerance: 0.0,
            point,
        });
    }
    if measured > eps {
        return Err(Error::Verification {
            measured,
            tolerance: eps,
            point: worst_at,
        });
    }
    Ok(BsplineNet {
        net,
        m,
        d,
        eps,
        squaring_steps: steps,
        error_bound: tensor_error_bound(mu, d, steps),
        measured_error: measured,
        verification_points: points.len(),
    })
}

/// Network for a finite series with tracked error bounds.
#[derive(Debug, Clone)]
pub struct Approximant {
    pub net: ReluNetwork,
    pub entries: usize,
    pub eps_unit: f64,
    /// `eps_unit · Σ|α|`.
    pub sum_bound: f64,
    /// `min(entries, (m+1)^d · levels) · eps_unit · max|α|`.
    pub active_bound: f64,
}

/// `Σ α_{k,j} Ṁ(D_k x − j)` with one shared gadget of accuracy `eps_unit`.
pub fn assemble_approximant(coeffs: &SparseCoeffs, eps_unit: f64) -> Result<Approximant> {
    let basis = coeffs.basis();
    let d = basis.dim();
    if coeffs.is_empty() {
        return Ok(Approximant {
            net: ReluNetwork::zero(d, 1),
            entries: 0,
            eps_unit,
            sum_bound: 0.0,
            active_bound: 0.0,
        });
    }
    let gadget = build_bspline_net(basis.m, d, eps_unit)?.net;
    let mut copies = Vec::with_capacity(coeffs.len());
    let mut alphas = Vec::with_capacity(coeffs.len());
    for (k, j, alpha) in coeffs.iter() {
        let shifts = basis.beta.level_shifts(k);
        let scale = CsrMatrix::from_triplets(
            d,
            d,
            shifts.iter().enumerate().map(|(i, &s)| (i, i, (1u64 << s) as f64)),
        );
        let offset: Vec<f64> = j.iter().map(|&v| -(v as f64)).collect();
        copies.push(gadget.precompose(&scale, &offset));
        alphas.push(alpha);
    }
    let n = copies.len();
    let sum = CsrMatrix::from_triplets(1, n, alphas.iter().enumerate().map(|(i, &a)| (0, i, a)));
    let net = ReluNetwork::parallel(&copies).then(&ReluNetwork::affine(sum, vec![0.0]));
    let levels = coeffs.levels().count();
    let per_point = (basis.m.get() as usize + 1).pow(d as u32) * levels;
    Ok(Approximant {
        net,
        entries: n,
        eps_unit,
        sum_bound: eps_unit * coeffs.abs_sum(),
        active_bound: n.min(per_point) as f64 * eps_unit * coeffs.max_abs(),
    })
}

/// `x ↦ net(Ax + b)`; depth unchanged.
pub fn precompose_affine(net: &ReluNetwork, a: &[Vec<f64>], b: &[f64]) -> Result<ReluNetwork> {
    if a.len() != net.input_dim() || b.len() != net.input_dim() {
        return Err(Error::Dimension {
            what: "affine map rows",
            expected: net.input_dim(),
            got: a.len().min(b.len()),
        });
    }
    let cols = a.first().map_or(0, Vec::len);
    if cols == 0 || a.iter().any(|r| r.len() != cols) {
        return Err(Error::config("affine map rows must share a positive length"));
    }
    Ok(net.precompose(&CsrMatrix::from_dense(a), b))
}

/// Parameter bound `(d̃ C + 1) B` after precomposition with `‖A‖_∞, ‖b‖_∞ ≤ C`.
pub fn precomposed_bound(d_tilde: usize, c: f64, b: f64) -> f64 {
    (d_tilde as f64 * c + 1.0) * b
}

/// `clip ∘ net_H ∘ clip ∘ … ∘ clip ∘ net_1` with `clip` the `[0,1]` clamp on
/// every coordinate; depth `Σ (L_ℓ + 1)`.
pub fn compose_with_clipping(nets: &[ReluNetwork]) -> Result<ReluNetwork> {
    let Some(first) = nets.first() else {
        return Err(Error::config("nothing to compose"));
    };
    let mut out = first.then(&clip_unit(first.output_dim()));
    for net in &nets[1..] {
        if net.input_dim() != out.output_dim() {
            return Err(Error::Dimension {
                what: "stage input",
                expected: out.output_dim(),
                got: net.input_dim(),
            });
        }
        // clipped values are nonnegative, so the extra ReLU is exact and
        // keeps the stage boundary as its own layer
        out = out.then_relu(net).then(&clip_unit(net.output_dim()));
    }
    Ok(out)
}

/// Output clipping `t ↦ min(max(t, −F), F)`; adds one layer.
pub fn clip_output(net: &ReluNetwork, f: f64) -> Result<ReluNetwork> {
    if net.output_dim() != 1 {
        return Err(Error::Dimension {
            what: "clipped network output",
            expected: 1,
            got: net.output_dim(),
        });
    }
    if !(f > 0.0) {
        return Err(Error::config("clip level F must be positive"));
    }
    Ok(net.then(&clip_symmetric(f)))
}
