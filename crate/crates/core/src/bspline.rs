//! Cardinal B-splines and the anisotropic tensor-product basis.
//!
//! The order-`m` cardinal B-spline `N_m` is the `(m+1)`-fold convolution of the
//! indicator of `[0, 1]`. It is a piecewise polynomial of degree `m`, supported
//! on `[0, m+1]`, and is evaluated here with the Cox–de Boor recursion on the
//! integer knots `0, 1, …, m+1`.
//!
//! At resolution level `k` coordinate `i` is dilated by `2^{⌊k β′_i⌋}` where
//! `β′_i = β̲ / β_i`, so rough directions (small `β_i`) are refined fastest.
//! The tensor basis is
//!
//! ```text
//! M_{k,j}(x) = Π_i N_m(2^{⌊k β′_i⌋} x_i − j_i),   j_i ∈ {−m, …, 2^{⌊k β′_i⌋}}.
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported spline order. Evaluation is `O(m²)` with a stack buffer.
pub const MAX_ORDER: u32 = 24;

/// Default cap on the cardinality of an index set `J(k)`.
pub const DEFAULT_INDEX_CAP: u128 = 100_000_000;

/// `⌊x⌋` for values that are mathematically integers but may carry rounding
/// error from products such as `5 × 0.8`.
pub(crate) fn floor_exact(x: f64) -> i64 {
    (x + 1e-9 * x.abs().max(1.0)).floor() as i64
}

/// `⌈x⌉` with the same tolerance as [`floor_exact`].
pub(crate) fn ceil_exact(x: f64) -> i64 {
    (x - 1e-9 * x.abs().max(1.0)).ceil() as i64
}

/// Anisotropic smoothness vector `β` together with its derived quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SmoothnessVec {
    beta: Vec<f64>,
    min: f64,
    max: f64,
    tilde: f64,
    prime: Vec<f64>,
}

impl SmoothnessVec {
    pub fn new(beta: Vec<f64>) -> Result<Self> {
        if beta.is_empty() {
            return Err(Error::config("smoothness vector must be non-empty"));
        }
        if let Some(b) = beta.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
            return Err(Error::config(format!(
                "smoothness entries must be finite and positive, got {b}"
            )));
        }
        let min = beta.iter().copied().fold(f64::INFINITY, f64::min);
        let max = beta.iter().copied().fold(0.0, f64::max);
        let tilde = 1.0 / beta.iter().map(|b| 1.0 / b).sum::<f64>();
        let prime = beta.iter().map(|b| min / b).collect();
        Ok(Self {
            beta,
            min,
            max,
            tilde,
            prime,
        })
    }

    /// `β = (β₀, …, β₀)` in `d` dimensions.
    pub fn isotropic(beta0: f64, d: usize) -> Result<Self> {
        Self::new(vec![beta0; d])
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.beta
    }

    /// `β̲ = min_i β_i`.
    pub fn beta_min(&self) -> f64 {
        self.min
    }

    /// `β̄ = max_i β_i`.
    pub fn beta_max(&self) -> f64 {
        self.max
    }

    /// Harmonic-type mean `β̃ = (Σ_i 1/β_i)^{-1}`, the effective smoothness.
    pub fn beta_tilde(&self) -> f64 {
        self.tilde
    }

    /// `β′_i = β̲ / β_i`.
    pub fn beta_prime(&self) -> &[f64] {
        &self.prime
    }

    /// Dyadic exponent `⌊k β̲/β_i⌋` of coordinate `i` at level `k`.
    pub fn level_shift(&self, k: u32, i: usize) -> u32 {
        floor_exact(k as f64 * self.min / self.beta[i]).max(0) as u32
    }

    pub fn level_shifts(&self, k: u32) -> Vec<u32> {
        (0..self.dim()).map(|i| self.level_shift(k, i)).collect()
    }
}

impl TryFrom<Vec<f64>> for SmoothnessVec {
    type Error = Error;

    fn try_from(beta: Vec<f64>) -> Result<Self> {
        Self::new(beta)
    }
}

impl From<SmoothnessVec> for Vec<f64> {
    fn from(s: SmoothnessVec) -> Self {
        s.beta
    }
}

/// Cardinal B-spline order `m` (`m = 0` is the indicator of `[0, 1)`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct SplineOrder(u32);

impl SplineOrder {
    pub fn new(m: u32) -> Result<Self> {
        if m > MAX_ORDER {
            return Err(Error::config(format!(
                "spline order {m} exceeds the supported maximum {MAX_ORDER}"
            )));
        }
        Ok(Self(m))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    pub fn as_usize(self) -> usize {
        self.0 as usize
    }
}

impl TryFrom<u32> for SplineOrder {
    type Error = Error;

    fn try_from(m: u32) -> Result<Self> {
        Self::new(m)
    }
}

impl From<SplineOrder> for u32 {
    fn from(m: SplineOrder) -> Self {
        m.0
    }
}

/// A resolution level `k` together with a location index `j ∈ J(k)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LevelLocation {
    pub k: u32,
    pub j: Vec<i64>,
}

impl LevelLocation {
    pub fn new(k: u32, j: Vec<i64>) -> Self {
        Self { k, j }
    }
}

/// Values of the `m+1` B-splines that are active at `t`.
///
/// Writes `out[r] = N_m(t − (l − r))` for `r = 0..=m` with `l = ⌊t⌋`, i.e.
/// the spline shifted by `j = l − r`, and returns `l`.
pub(crate) fn active_values(m: usize, t: f64, out: &mut [f64]) -> i64 {
    let l = t.floor();
    let u = t - l;
    out[0] = 1.0;
    for q in 1..=m {
        let inv_q = 1.0 / q as f64;
        // N_q(u + r) = [(u + r) N_{q-1}(u + r) + (q + 1 − u − r) N_{q-1}(u + r − 1)] / q
        for r in (0..=q).rev() {
            let x = u + r as f64;
            let keep = if r < q { x * out[r] } else { 0.0 };
            let shift = if r >= 1 {
                (q as f64 + 1.0 - x) * out[r - 1]
            } else {
                0.0
            };
            out[r] = (keep + shift) * inv_q;
        }
    }
    l as i64
}

/// Evaluates the cardinal B-spline `N_m(x)`.
///
/// Zero outside `[0, m+1]` (for `m = 0` the support is `[0, 1)`).
pub fn eval_cardinal_bspline(m: SplineOrder, x: f64) -> f64 {
    let m = m.as_usize();
    let upper = (m + 1) as f64;
    if !(x >= 0.0 && x < upper) || (m > 0 && x == 0.0) {
        return 0.0;
    }
    let mut buf = [0.0; MAX_ORDER as usize + 1];
    let l = active_values(m, x, &mut buf[..=m]);
    // j = 0 corresponds to r = l.
    buf[l as usize]
}

/// Evaluates the tensor basis function `M_{k,j}(x)`.
pub fn eval_tensor_basis(
    kl: &LevelLocation,
    beta: &SmoothnessVec,
    m: SplineOrder,
    x: &[f64],
) -> Result<f64> {
    let d = beta.dim();
    if kl.j.len() != d {
        return Err(Error::Dimension {
            what: "location index",
            expected: d,
            got: kl.j.len(),
        });
    }
    if x.len() != d {
        return Err(Error::Dimension {
            what: "evaluation point",
            expected: d,
            got: x.len(),
        });
    }
    let mut value = 1.0;
    for i in 0..d {
        let scale = (1u64 << beta.level_shift(kl.k, i)) as f64;
        value *= eval_cardinal_bspline(m, scale * x[i] - kl.j[i] as f64);
        if value == 0.0 {
            break;
        }
    }
    Ok(value)
}

/// `‖k‖_{β̲/β} = Σ_i ⌊k β̲/β_i⌋`.
pub fn level_norm(k: u32, beta: &SmoothnessVec) -> u64 {
    (0..beta.dim()).map(|i| beta.level_shift(k, i) as u64).sum()
}

/// The location index set `J(k) = J_1(k) × … × J_d(k)` with
/// `J_i(k) = {−m, …, 2^{⌊k β′_i⌋}}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSet {
    level: u32,
    m: i64,
    upper: Vec<i64>,
}

impl IndexSet {
    /// Per-coordinate extents `|J_i(k)| = 2^{⌊kβ′_i⌋} + m + 1`.
    pub fn extents(&self) -> Vec<usize> {
        self.upper
            .iter()
            .map(|&u| (u + self.m + 1) as usize)
            .collect()
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.upper.len()
    }

    /// Smallest index in every coordinate, `−m`.
    pub fn lower(&self) -> i64 {
        -self.m
    }

    /// Largest index per coordinate, `2^{⌊kβ′_i⌋}`.
    pub fn upper(&self) -> &[i64] {
        &self.upper
    }

    pub fn len(&self) -> usize {
        self.extents().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, j: &[i64]) -> bool {
        j.len() == self.dim()
            && j.iter()
                .zip(&self.upper)
                .all(|(&ji, &u)| ji >= -self.m && ji <= u)
    }

    /// Row-major position of `j` (last coordinate fastest).
    pub fn linear_index(&self, j: &[i64]) -> Option<usize> {
        if !self.contains(j) {
            return None;
        }
        let mut idx = 0usize;
        for (ji, ext) in j.iter().zip(self.extents()) {
            idx = idx * ext + (ji + self.m) as usize;
        }
        Some(idx)
    }

    /// Inverse of [`IndexSet::linear_index`].
    pub fn location(&self, mut idx: usize) -> Vec<i64> {
        let ext = self.extents();
        let mut j = vec![0i64; ext.len()];
        for i in (0..ext.len()).rev() {
            j[i] = (idx % ext[i]) as i64 - self.m;
            idx /= ext[i];
        }
        j
    }

    /// Lazily enumerates `J(k)` in row-major (lexicographic) order.
    pub fn iter(&self) -> IndexIter<'_> {
        IndexIter {
            set: self,
            next: Some(vec![-self.m; self.dim()]),
        }
    }
}

/// Odometer over an [`IndexSet`].
pub struct IndexIter<'a> {
    set: &'a IndexSet,
    next: Option<Vec<i64>>,
}

impl Iterator for IndexIter<'_> {
    type Item = Vec<i64>;

    fn next(&mut self) -> Option<Vec<i64>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut i = succ.len();
        loop {
            if i == 0 {
                break;
            }
            i -= 1;
            if succ[i] < self.set.upper[i] {
                succ[i] += 1;
                self.next = Some(succ);
                break;
            }
            succ[i] = -self.set.m;
        }
        Some(current)
    }
}

/// Builds `J(k)` with the default cardinality cap.
pub fn index_set(k: u32, beta: &SmoothnessVec, m: SplineOrder) -> Result<IndexSet> {
    index_set_capped(k, beta, m, DEFAULT_INDEX_CAP)
}

/// Builds `J(k)`, rejecting sets with more than `cap` elements.
pub fn index_set_capped(
    k: u32,
    beta: &SmoothnessVec,
    m: SplineOrder,
    cap: u128,
) -> Result<IndexSet> {
    let m_i = m.get() as i64;
    let mut size: u128 = 1;
    let mut upper = Vec::with_capacity(beta.dim());
    for i in 0..beta.dim() {
        let s = beta.level_shift(k, i);
        if s > 62 {
            return Err(Error::IndexCap {
                level: k,
                size: u128::MAX,
                cap,
            });
        }
        let u = 1i64 << s;
        size = size.saturating_mul((u + m_i + 1) as u128);
        upper.push(u);
    }
    if size > cap {
        return Err(Error::IndexCap {
            level: k,
            size,
            cap,
        });
    }
    Ok(IndexSet {
        level: k,
        m: m_i,
        upper,
    })
}
