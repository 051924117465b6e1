//! Level-wise least-squares quasi-interpolation.
//!
//! `P_k f` is the discrete least-squares fit of `f` in the span of
//! `{M_{k,j} : j ∈ J(k)}` on a tensor grid with `max(4, m+2)` midpoint samples
//! per dyadic cell and coordinate. The tensor structure makes the fit
//! separable: the pseudo-inverse of a Kronecker design is the Kronecker
//! product of the per-axis pseudo-inverses, and each axis system is a banded
//! Gram matrix solved by banded Cholesky.
//!
//! Basis functions whose support meets `[0,1]` only in a null set (the
//! rightmost location `j_i = 2^{⌊kβ′_i⌋}`) see no samples; their coefficients
//! are reported as zero.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::besov::coeffs::{SeriesBasis, SparseCoeffs};
use crate::bspline::{active_values, IndexSet, MAX_ORDER};
use crate::error::{Error, Result};
use crate::target::Target;

/// Largest accepted condition estimate of the level Gram system.
pub const MAX_CONDITION: f64 = 1e12;

/// Coefficients of `P_k f` over `J(k)` in row-major order.
#[derive(Debug, Clone)]
pub struct LevelProjection {
    pub set: IndexSet,
    pub coeffs: Vec<f64>,
    /// Product of per-axis Gram condition estimates.
    pub condition: f64,
}

impl LevelProjection {
    pub fn get(&self, j: &[i64]) -> Option<f64> {
        self.set.linear_index(j).map(|i| self.coeffs[i])
    }
}

/// Sparse design of one axis: row `p` has `m+1` entries starting at column
/// `first[p]`, stored in increasing column order.
struct AxisDesign {
    width: usize,
    first: Vec<usize>,
    vals: Vec<f64>,
}

impl AxisDesign {
    /// Splines with dyadic shift `s` evaluated at `points`; column `c` is
    /// location `j = c − m`.
    fn new(s: u32, m: usize, points: &[f64]) -> Self {
        let scale = (1u64 << s) as f64;
        let mut first = Vec::with_capacity(points.len());
        let mut vals = Vec::with_capacity(points.len() * (m + 1));
        let mut buf = [0.0; MAX_ORDER as usize + 1];
        for &x in points {
            let l = active_values(m, scale * x, &mut buf[..=m]);
            // j = l − r, so column j + m runs from l upwards as r descends.
            first.push(l as usize);
            vals.extend((0..=m).rev().map(|r| buf[r]));
        }
        Self {
            width: m + 1,
            first,
            vals,
        }
    }

    fn row(&self, p: usize) -> (usize, &[f64]) {
        (self.first[p], &self.vals[p * self.width..(p + 1) * self.width])
    }

    /// `out[p] = Σ_c B[p,c] coef[c]`; columns beyond `coef` count as zero.
    fn synthesize(&self, coef: &[f64], out: &mut [f64]) {
        for (p, o) in out.iter_mut().enumerate() {
            let (c0, row) = self.row(p);
            *o = row
                .iter()
                .enumerate()
                .filter_map(|(t, v)| coef.get(c0 + t).map(|c| c * v))
                .sum();
        }
    }
}

/// Least-squares projector for one axis at one dyadic shift.
struct AxisProjector {
    n_basis: usize,
    points: Vec<f64>,
    design: AxisDesign,
    /// Reduced index of each column, `None` for columns without samples.
    reduced: Vec<Option<usize>>,
    chol: BandCholesky,
    condition: f64,
}

impl AxisProjector {
    fn new(s: u32, m: usize) -> Result<Self> {
        let cells = 1usize << s;
        let per_cell = 4.max(m + 2);
        let n = cells * per_cell;
        let points: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let design = AxisDesign::new(s, m, &points);
        let n_basis = cells + m + 1;
        let mut col_sq = vec![0.0; n_basis];
        for p in 0..n {
            let (c0, row) = design.row(p);
            for (t, v) in row.iter().enumerate() {
                if c0 + t < n_basis {
                    col_sq[c0 + t] += v * v;
                }
            }
        }
        let mut reduced = vec![None; n_basis];
        let mut n_kept = 0;
        for (c, &sq) in col_sq.iter().enumerate() {
            if sq > 0.0 {
                reduced[c] = Some(n_kept);
                n_kept += 1;
            }
        }
        let mut band = BandMatrix::zeros(n_kept, m);
        for p in 0..n {
            let (c0, row) = design.row(p);
            for a in 0..row.len() {
                let Some(Some(ra)) = reduced.get(c0 + a) else { continue };
                for b in 0..=a {
                    let Some(Some(rb)) = reduced.get(c0 + b) else { continue };
                    *band.at_mut(*ra, *rb) += row[a] * row[b];
                }
            }
        }
        let chol = BandCholesky::factor(&band)
            .ok_or_else(|| Error::Singular(format!("axis Gram matrix at shift {s}")))?;
        let condition = band.condition_estimate(&chol);
        Ok(Self {
            n_basis,
            points,
            design,
            reduced,
            chol,
            condition,
        })
    }

    /// Least-squares coefficients of samples `y` (one per grid point).
    fn apply(&self, y: &[f64], out: &mut [f64]) {
        let mut rhs = vec![0.0; self.chol.n];
        for (p, &yp) in y.iter().enumerate() {
            let (c0, row) = self.design.row(p);
            for (t, v) in row.iter().enumerate() {
                if let Some(Some(r)) = self.reduced.get(c0 + t) {
                    rhs[*r] += v * yp;
                }
            }
        }
        self.chol.solve(&mut rhs);
        for (c, o) in out.iter_mut().enumerate() {
            *o = self.reduced[c].map_or(0.0, |r| rhs[r]);
        }
    }
}

/// Symmetric banded matrix storing the lower band: `data[i][t] = A[i][i−t]`.
struct BandMatrix {
    n: usize,
    w: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    fn zeros(n: usize, w: usize) -> Self {
        Self {
            n,
            w,
            data: vec![0.0; n * (w + 1)],
        }
    }

    /// Entry `(i, j)` with `j ≤ i ≤ j + w`.
    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(i - j <= self.w);
        &mut self.data[i * (self.w + 1) + (i - j)]
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.w {
            0.0
        } else {
            self.data[i * (self.w + 1) + (i - j)]
        }
    }

    fn mul(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let lo = i.saturating_sub(self.w);
            let hi = (i + self.w).min(self.n - 1);
            y[i] = (lo..=hi).map(|j| self.at(i, j) * x[j]).sum();
        }
    }

    /// `λ_max/λ_min` by power and inverse iteration.
    fn condition_estimate(&self, chol: &BandCholesky) -> f64 {
        if self.n == 0 {
            return 1.0;
        }
        let start: Vec<f64> = (0..self.n)
            .map(|i| 1.0 + 0.5 * ((i * 7919) % 13) as f64 / 13.0)
            .collect();
        let normalize = |v: &mut [f64]| {
            let nrm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            v.iter_mut().for_each(|a| *a /= nrm);
            nrm
        };
        let mut v = start.clone();
        normalize(&mut v);
        let mut w = vec![0.0; self.n];
        let mut lmax = 0.0;
        for _ in 0..100 {
            self.mul(&v, &mut w);
            lmax = normalize(&mut w);
            std::mem::swap(&mut v, &mut w);
        }
        let mut v = start;
        normalize(&mut v);
        let mut inv_lmin = 0.0;
        for _ in 0..100 {
            chol.solve(&mut v);
            inv_lmin = normalize(&mut v);
        }
        lmax * inv_lmin
    }
}

/// Banded Cholesky factor `A = L Lᵀ`, `data[i][t] = L[i][i−t]`.
struct BandCholesky {
    n: usize,
    w: usize,
    data: Vec<f64>,
}

impl BandCholesky {
    fn factor(a: &BandMatrix) -> Option<Self> {
        let (n, w) = (a.n, a.w);
        let mut l = vec![0.0; n * (w + 1)];
        let idx = |i: usize, j: usize| i * (w + 1) + (i - j);
        for i in 0..n {
            let lo = i.saturating_sub(w);
            for j in lo..=i {
                let mut sum = a.at(i, j);
                for t in lo.max(j.saturating_sub(w))..j {
                    sum -= l[idx(i, t)] * l[idx(j, t)];
                }
                if i == j {
                    if !(sum > 0.0) {
                        return None;
                    }
                    l[idx(i, i)] = sum.sqrt();
                } else {
                    l[idx(i, j)] = sum / l[idx(j, j)];
                }
            }
        }
        Some(Self { n, w, data: l })
    }

    fn solve(&self, b: &mut [f64]) {
        let w = self.w;
        let idx = |i: usize, j: usize| i * (w + 1) + (i - j);
        for i in 0..self.n {
            let lo = i.saturating_sub(w);
            let mut s = b[i];
            for j in lo..i {
                s -= self.data[idx(i, j)] * b[j];
            }
            b[i] = s / self.data[idx(i, i)];
        }
        for i in (0..self.n).rev() {
            let hi = (i + w).min(self.n - 1);
            let mut s = b[i];
            for j in i + 1..=hi {
                s -= self.data[idx(j, i)] * b[j];
            }
            b[i] = s / self.data[idx(i, i)];
        }
    }
}

/// Applies `op` to every fiber of `data` along `axis`, changing that
/// extent from `shape[axis]` to `new_len`.
fn mode_apply(
    data: &[f64],
    shape: &[usize],
    axis: usize,
    new_len: usize,
    op: impl Fn(&[f64], &mut [f64]) + Sync,
) -> Vec<f64> {
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let len = shape[axis];
    let mut out = vec![0.0; outer * new_len * inner];
    out.par_chunks_mut(new_len * inner)
        .enumerate()
        .for_each(|(o, block)| {
            let src = &data[o * len * inner..(o + 1) * len * inner];
            let mut fiber = vec![0.0; len];
            let mut result = vec![0.0; new_len];
            for t in 0..inner {
                for i in 0..len {
                    fiber[i] = src[i * inner + t];
                }
                op(&fiber, &mut result);
                for i in 0..new_len {
                    block[i * inner + t] = result[i];
                }
            }
        });
    out
}

/// Caches per-axis projectors for a fixed basis.
pub struct Projector {
    basis: SeriesBasis,
    axes: Mutex<HashMap<u32, Arc<AxisProjector>>>,
}

impl Projector {
    pub fn new(basis: SeriesBasis) -> Self {
        Self {
            basis,
            axes: Mutex::new(HashMap::new()),
        }
    }

    pub fn basis(&self) -> &SeriesBasis {
        &self.basis
    }

    fn axis(&self, s: u32) -> Result<Arc<AxisProjector>> {
        let mut cache = self.axes.lock().expect("projector cache poisoned");
        if let Some(op) = cache.get(&s) {
            return Ok(op.clone());
        }
        let op = Arc::new(AxisProjector::new(s, self.basis.m.as_usize())?);
        cache.insert(s, op.clone());
        Ok(op)
    }

    fn level_axes(&self, k: u32) -> Result<Vec<Arc<AxisProjector>>> {
        self.basis
            .beta
            .level_shifts(k)
            .into_iter()
            .map(|s| self.axis(s))
            .collect()
    }

    /// Samples `f` on the level-`k` tensor grid (row-major).
    fn sample<T: Target + ?Sized>(&self, f: &T, axes: &[Arc<AxisProjector>]) -> Vec<f64> {
        let shape: Vec<usize> = axes.iter().map(|a| a.points.len()).collect();
        let total: usize = shape.iter().product();
        let d = shape.len();
        (0..total)
            .into_par_iter()
            .map_init(
                || vec![0.0; d],
                |x, mut idx| {
                    for i in (0..d).rev() {
                        x[i] = axes[i].points[idx % shape[i]];
                        idx /= shape[i];
                    }
                    f.eval(x)
                },
            )
            .collect()
    }

    /// Applies the per-axis pseudo-inverses to grid samples.
    fn solve(&self, k: u32, axes: &[Arc<AxisProjector>], samples: Vec<f64>) -> Result<LevelProjection> {
        let mut shape: Vec<usize> = axes.iter().map(|a| a.points.len()).collect();
        let mut data = samples;
        let mut condition = 1.0;
        for (i, ax) in axes.iter().enumerate() {
            data = mode_apply(&data, &shape, i, ax.n_basis, |y, out| ax.apply(y, out));
            shape[i] = ax.n_basis;
            condition *= ax.condition;
        }
        if !(condition <= MAX_CONDITION) {
            return Err(Error::IllConditioned {
                level: k,
                condition,
            });
        }
        Ok(LevelProjection {
            set: self.basis.index_set(k)?,
            coeffs: data,
            condition,
        })
    }

    /// `P_k f`.
    pub fn project<T: Target + ?Sized>(&self, f: &T, k: u32) -> Result<LevelProjection> {
        if f.dim() != self.basis.dim() {
            return Err(Error::Dimension {
                what: "projected function",
                expected: self.basis.dim(),
                got: f.dim(),
            });
        }
        let axes = self.level_axes(k)?;
        self.basis.index_set(k)?;
        let samples = self.sample(f, &axes);
        self.solve(k, &axes, samples)
    }

    /// Re-expands a level-`k−1` coefficient tensor at level `k`.
    fn refine(&self, coarse: &LevelProjection, k: u32) -> Result<LevelProjection> {
        let axes = self.level_axes(k)?;
        let m = self.basis.m.as_usize();
        let coarse_shifts = self.basis.beta.level_shifts(coarse.set.level());
        let mut shape = coarse.set.extents();
        let mut data = coarse.coeffs.clone();
        for (i, ax) in axes.iter().enumerate() {
            let design = AxisDesign::new(coarse_shifts[i], m, &ax.points);
            data = mode_apply(&data, &shape, i, ax.points.len(), |c, out| {
                design.synthesize(c, out)
            });
            shape[i] = ax.points.len();
        }
        self.solve(k, &axes, data)
    }

    /// Telescoped coefficients of `P_k f − P_{k−1} f`, `k = 0..=k_max`.
    pub fn telescope<T: Target + ?Sized>(&self, f: &T, k_max: u32) -> Result<SparseCoeffs> {
        let mut out = SparseCoeffs::new(self.basis.clone());
        let mut prev: Option<LevelProjection> = None;
        for k in 0..=k_max {
            let current = self.project(f, k)?;
            let refined = match &prev {
                Some(p) => Some(self.refine(p, k)?),
                None => None,
            };
            for (idx, j) in current.set.iter().enumerate() {
                let a = current.coeffs[idx] - refined.as_ref().map_or(0.0, |r| r.coeffs[idx]);
                if a != 0.0 {
                    out.insert(k, j, a)?;
                }
            }
            prev = Some(current);
        }
        Ok(out)
    }
}

/// `P_k f` for a one-off projection.
pub fn quasi_project<T: Target + ?Sized>(
    f: &T,
    k: u32,
    basis: &SeriesBasis,
) -> Result<LevelProjection> {
    Projector::new(basis.clone()).project(f, k)
}

/// Telescoped coefficients `α_k` of `p_k = P_k f − P_{k−1} f` for
/// `k = 0..=k_max` with `P_{−1} = 0`.
pub fn telescoped_coeffs<T: Target + ?Sized>(
    f: &T,
    k_max: u32,
    basis: &SeriesBasis,
) -> Result<SparseCoeffs> {
    Projector::new(basis.clone()).telescope(f, k_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bspline::{eval_tensor_basis, LevelLocation, SmoothnessVec, SplineOrder};
    use crate::target::{Constant, FnTarget};

    fn basis(beta: &[f64], m: u32) -> SeriesBasis {
        SeriesBasis::new(
            SmoothnessVec::new(beta.to_vec()).unwrap(),
            SplineOrder::new(m).unwrap(),
        )
    }

    fn basis_fn(b: &SeriesBasis, k: u32, j: Vec<i64>) -> impl Target + '_ {
        let d = b.dim();
        FnTarget::new(d, move |x: &[f64]| {
            eval_tensor_basis(&LevelLocation::new(k, j.clone()), &b.beta, b.m, x).unwrap()
        })
    }

    #[test]
    fn reproduces_basis_element() {
        let b = basis(&[1.0, 2.0], 2);
        for (k, j0) in [(0, vec![0, -1]), (2, vec![1, 0]), (3, vec![-2, 1])] {
            let proj = quasi_project(&basis_fn(&b, k, j0.clone()), k, &b).unwrap();
            for (idx, j) in proj.set.iter().enumerate() {
                let expect = if j == j0 { 1.0 } else { 0.0 };
                assert!((proj.coeffs[idx] - expect).abs() < 1e-10, "{k} {j:?}");
            }
        }
    }

    #[test]
    fn constant_reproduction_in_interior() {
        let b = basis(&[1.0, 1.0], 3);
        let proj = quasi_project(&Constant { dim: 2, value: 1.0 }, 2, &b).unwrap();
        for (idx, j) in proj.set.iter().enumerate() {
            // j = 4 never touches the samples and is reported as 0.
            if j.iter().all(|&v| v < 4) {
                assert!((proj.coeffs[idx] - 1.0).abs() < 1e-9, "{j:?}");
            }
        }
    }

    #[test]
    fn residual_decreases_with_level() {
        let b = basis(&[1.0], 2);
        let f = FnTarget::new(1, |x: &[f64]| (7.0 * x[0]).sin());
        let mut last = f64::INFINITY;
        for k in 0..4 {
            let proj = quasi_project(&f, k, &b).unwrap();
            let mut c = SparseCoeffs::new(b.clone());
            for (idx, j) in proj.set.iter().enumerate() {
                c.insert(k, j, proj.coeffs[idx]).unwrap();
            }
            let err: f64 = (0..2000)
                .map(|i| {
                    let x = (i as f64 + 0.5) / 2000.0;
                    (f.eval(&[x]) - c.eval(&[x])).powi(2)
                })
                .sum::<f64>()
                / 2000.0;
            assert!(err < last, "level {k}: {err} !< {last}");
            last = err;
        }
    }

    #[test]
    fn telescoping_collapses_on_coarse_span() {
        let b = basis(&[1.0, 2.0], 2);
        let f = basis_fn(&b, 0, vec![-1, 0]);
        let c = telescoped_coeffs(&f, 3, &b).unwrap();
        for (k, _, a) in c.iter() {
            if k == 0 {
                continue;
            }
            assert!(a.abs() < 1e-8);
        }
    }

    #[test]
    fn telescoped_series_reconstructs_projection() {
        let b = basis(&[1.0, 2.0], 2);
        let f = FnTarget::new(2, |x: &[f64]| (3.0 * x[0] + x[1] * x[1]).cos());
        let c = telescoped_coeffs(&f, 3, &b).unwrap();
        let top = quasi_project(&f, 3, &b).unwrap();
        let mut direct = SparseCoeffs::new(b.clone());
        for (idx, j) in top.set.iter().enumerate() {
            direct.insert(3, j, top.coeffs[idx]).unwrap();
        }
        for i in 0..200 {
            let x = [(i as f64 * 0.6180339) % 1.0, (i as f64 * 0.4142135) % 1.0];
            assert!((c.eval(&x) - direct.eval(&x)).abs() < 1e-10);
        }
    }

    #[test]
    fn band_cholesky_solves() {
        let mut a = BandMatrix::zeros(5, 1);
        for i in 0..5 {
            *a.at_mut(i, i) = 4.0;
            if i > 0 {
                *a.at_mut(i, i - 1) = 1.0;
            }
        }
        let chol = BandCholesky::factor(&a).unwrap();
        let x = [1.0, -2.0, 0.5, 3.0, 1.0];
        let mut b = vec![0.0; 5];
        a.mul(&x, &mut b);
        chol.solve(&mut b);
        for i in 0..5 {
            assert!((b[i] - x[i]).abs() < 1e-14);
        }
        let cond = a.condition_estimate(&chol);
        // eigenvalues 4 + 2cos(iπ/6)
        let expect = (4.0 + 3f64.sqrt()) / (4.0 - 3f64.sqrt());
        assert!((cond - expect).abs() < 1e-6);
    }
}
