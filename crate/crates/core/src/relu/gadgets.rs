//! Elementary ReLU building blocks.

use crate::relu::matrix::CsrMatrix;
use crate::relu::network::{Layer, ReluNetwork};

fn layer(rows: usize, cols: usize, t: Vec<(usize, usize, f64)>, bias: Vec<f64>) -> Layer {
    Layer::new(CsrMatrix::from_triplets(rows, cols, t), bias)
}

fn affine(rows: usize, cols: usize, t: Vec<(usize, usize, f64)>, bias: Vec<f64>) -> ReluNetwork {
    ReluNetwork::affine(CsrMatrix::from_triplets(rows, cols, t), bias)
}

/// Piecewise-linear interpolant of `x²` on `[0,1]` at spacing `2^{−steps}`,
/// with error at most `2^{−2·steps−2}`. Built from `steps` compositions of
/// the tooth map `g(x) = 2η(x) − 4η(x − 1/2) + 2η(x − 1)`. Negative inputs
/// give 0. Depth `max(steps, 1) + 1`, width 4.
pub fn square(steps: u32) -> ReluNetwork {
    // hidden units per stage: η(t), η(t−1/2), η(t−1), accumulator
    let tooth = |row0: usize| vec![(row0, 0, 2.0), (row0, 1, -4.0), (row0, 2, 2.0)];
    let mut layers = vec![layer(
        4,
        1,
        vec![(0, 0, 1.0), (1, 0, 1.0), (2, 0, 1.0), (3, 0, 1.0)],
        vec![0.0, -0.5, -1.0, 0.0],
    )];
    for s in 1..=steps {
        let scale = (-2.0 * s as f64).exp2();
        let last = s == steps;
        let mut t = Vec::new();
        // accumulator row: a − g_s / 4^s
        let acc_row = if last { 0 } else { 3 };
        t.push((acc_row, 3, 1.0));
        for (_, c, v) in tooth(acc_row) {
            t.push((acc_row, c, -scale * v));
        }
        if last {
            layers.push(layer(1, 4, t, vec![0.0]));
        } else {
            for r in 0..3 {
                for (_, c, v) in tooth(r) {
                    t.push((r, c, v));
                }
            }
            layers.push(layer(4, 4, t, vec![0.0, -0.5, -1.0, 0.0]));
        }
    }
    if steps == 0 {
        layers.push(layer(1, 4, vec![(0, 3, 1.0)], vec![0.0]));
    }
    ReluNetwork::new(layers).expect("consistent square gadget")
}

/// Coordinatewise `min(max(x, 0), 1) = η(x) − η(x − 1)`, depth 2.
pub fn clip_unit(d: usize) -> ReluNetwork {
    let first = affine(
        2 * d,
        d,
        (0..d).flat_map(|i| [(2 * i, i, 1.0), (2 * i + 1, i, 1.0)]).collect(),
        (0..d).flat_map(|_| [0.0, -1.0]).collect(),
    );
    let second = affine(
        d,
        2 * d,
        (0..d).flat_map(|i| [(i, 2 * i, 1.0), (i, 2 * i + 1, -1.0)]).collect(),
        vec![0.0; d],
    );
    first.then_relu(&second)
}

/// `min(max(t, −F), F) = η(t + F) − η(t − F) − F`, depth 2.
pub fn clip_symmetric(f: f64) -> ReluNetwork {
    affine(2, 1, vec![(0, 0, 1.0), (1, 0, 1.0)], vec![f, -f])
        .then_relu(&affine(1, 2, vec![(0, 0, 1.0), (0, 1, -1.0)], vec![-f]))
}

/// `min(a, b) = η(a) − η(−a) − η(a − b)`, exact, depth 2.
pub fn min_pair() -> ReluNetwork {
    affine(
        3,
        2,
        vec![(0, 0, 1.0), (1, 0, -1.0), (2, 0, 1.0), (2, 1, -1.0)],
        vec![0.0; 3],
    )
    .then_relu(&affine(1, 3, vec![(0, 0, 1.0), (0, 1, -1.0), (0, 2, -1.0)], vec![0.0]))
}

/// Exact minimum of `n` inputs by a balanced tree of [`min_pair`].
pub fn min_tree(n: usize) -> ReluNetwork {
    reduce_tree(n, &min_pair())
}

/// Approximate product on `[0,1]²` by polarization,
/// `xy = 2(\frac{x+y}{2})² − x²/2 − y²/2`, after clipping both inputs to
/// `[0,1]`. Error at most `3·2^{−2·steps−2}`.
pub fn multiply(steps: u32) -> ReluNetwork {
    let sq = square(steps);
    let mix = affine(3, 2, vec![(0, 0, 0.5), (0, 1, 0.5), (1, 0, 1.0), (2, 1, 1.0)], vec![0.0; 3]);
    let combine = affine(1, 3, vec![(0, 0, 2.0), (0, 1, -0.5), (0, 2, -0.5)], vec![0.0]);
    clip_unit(2)
        .then(&mix)
        .then(&ReluNetwork::stack(&[sq.clone(), sq.clone(), sq]))
        .then(&combine)
}

/// Error bound of [`multiply`].
pub fn multiply_error(steps: u32) -> f64 {
    3.0 * (-2.0 * steps as f64 - 2.0).exp2()
}

/// Applies a two-input gadget along a balanced binary tree over `n` inputs.
fn reduce_tree(n: usize, pair: &ReluNetwork) -> ReluNetwork {
    assert!(n >= 1);
    let mut net = ReluNetwork::identity(n, 1);
    let mut width = n;
    while width > 1 {
        let mut parts: Vec<ReluNetwork> = (0..width / 2).map(|_| pair.clone()).collect();
        if width % 2 == 1 {
            parts.push(ReluNetwork::identity(1, 1));
        }
        net = net.then(&ReluNetwork::stack(&parts));
        width = width.div_ceil(2);
    }
    net
}

/// Approximate product of `n` inputs in `[0,1]`, balanced tree of
/// [`multiply`]. Error at most `(n − 1)·multiply_error(steps)`.
pub fn product_tree(n: usize, steps: u32) -> ReluNetwork {
    reduce_tree(n, &multiply(steps))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_error_bound() {
        for steps in 0..6 {
            let net = square(steps);
            assert_eq!(net.depth(), steps.max(1) as usize + 1);
            let bound = (-2.0 * steps as f64 - 2.0).exp2();
            let worst = (0..=4096)
                .map(|i| {
                    let x = i as f64 / 4096.0;
                    (net.eval_scalar(&[x]) - x * x).abs()
                })
                .fold(0.0, f64::max);
            assert!(worst <= bound * (1.0 + 1e-12), "steps {steps}: {worst} > {bound}");
            assert_eq!(net.eval_scalar(&[-0.5]), 0.0);
        }
    }

    #[test]
    fn clips_and_minimum() {
        let c = clip_unit(1);
        assert_eq!(c.eval_scalar(&[1.7]), 1.0);
        assert_eq!(c.eval_scalar(&[-0.2]), 0.0);
        assert_eq!(c.eval_scalar(&[0.25]), 0.25);
        let f = clip_symmetric(2.0);
        assert_eq!(f.forward(&[-3.0]), vec![-2.0]);
        assert_eq!(f.forward(&[1.5]), vec![1.5]);
        let m = min_tree(5);
        assert_eq!(m.forward(&[3.0, -1.0, 2.0, 0.5, 7.0]), vec![-1.0]);
    }

    #[test]
    fn product_error() {
        let steps = 6;
        let p = product_tree(3, steps);
        let bound = 2.0 * multiply_error(steps);
        for &(a, b, c) in &[(0.3, 0.9, 0.5), (1.0, 1.0, 1.0), (0.0, 0.7, 0.2), (0.11, 0.42, 0.99)] {
            assert!((p.eval_scalar(&[a, b, c]) - a * b * c).abs() <= bound);
        }
    }
}
