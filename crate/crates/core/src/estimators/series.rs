//! Least-squares B-spline series estimators.
//!
//! The non-adaptive estimator fits every basis function of a single level
//! `K`. The adaptive estimator follows the approximation schedule: a base fit
//! at level `K`, then on each tail level `K < k ≤ K*` the `n_k` basis functions
//! with the largest empirical coefficient `⟨r, φ⟩_n / ⟨φ, φ⟩_n` of the base
//! residual `r`, and a joint refit of everything kept.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::adaptive::AdaptivePlan;
use crate::besov::coeffs::{SeriesBasis, SeriesEvaluator, SparseCoeffs};
use crate::bspline::{active_values, level_norm, IndexSet, MAX_ORDER};
use crate::error::{Error, Result};
use crate::estimators::dataset::RegressionDataset;
use crate::quadrature::gauss_legendre;
use crate::target::Target;

/// Map from the ambient input to the coordinates the series is expanded in.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FeatureMap {
    #[default]
    Identity,
    /// `z = Ax + b`, clamped to `[0,1]`.
    Affine { a: Vec<Vec<f64>>, b: Vec<f64> },
}

impl FeatureMap {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            FeatureMap::Identity => x.to_vec(),
            FeatureMap::Affine { a, b } => a
                .iter()
                .zip(b)
                .map(|(row, bi)| {
                    (bi + row.iter().zip(x).map(|(a, x)| a * x).sum::<f64>()).clamp(0.0, 1.0)
                })
                .collect(),
        }
    }

    fn check(&self, d_in: usize, d_out: usize) -> Result<()> {
        match self {
            FeatureMap::Identity if d_in != d_out => Err(Error::Dimension {
                what: "series input",
                expected: d_out,
                got: d_in,
            }),
            FeatureMap::Affine { a, b }
                if a.len() != d_out || b.len() != d_out || a.iter().any(|r| r.len() != d_in) =>
            {
                Err(Error::Dimension {
                    what: "feature map",
                    expected: d_out,
                    got: a.len(),
                })
            }
            _ => Ok(()),
        }
    }
}

/// Which series estimator produced a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesKind {
    AdaptiveSeries,
    NonadaptiveSeries,
}

/// A fitted series `z ↦ Σ α M(z)` composed with a feature map and clipped.
#[derive(Clone)]
pub struct SeriesModel {
    pub kind: SeriesKind,
    pub input_dim: usize,
    pub features: FeatureMap,
    pub coeffs: SparseCoeffs,
    pub clip: f64,
    evaluator: Arc<SeriesEvaluator>,
}

impl std::fmt::Debug for SeriesModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SeriesModel")
            .field("kind", &self.kind)
            .field("terms", &self.coeffs.len())
            .field("clip", &self.clip)
            .finish_non_exhaustive()
    }
}

impl SeriesModel {
    pub fn new(
        kind: SeriesKind,
        input_dim: usize,
        features: FeatureMap,
        coeffs: SparseCoeffs,
        clip: f64,
    ) -> Result<Self> {
        features.check(input_dim, coeffs.basis().dim())?;
        let evaluator = Arc::new(coeffs.evaluator()?);
        Ok(Self {
            kind,
            input_dim,
            features,
            coeffs,
            clip,
            evaluator,
        })
    }

    /// Unclipped series value.
    pub fn raw(&self, x: &[f64]) -> f64 {
        self.evaluator.eval(&self.features.apply(x))
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.raw(x).clamp(-self.clip, self.clip)
    }

    /// Number of fitted basis functions.
    pub fn terms(&self) -> usize {
        self.coeffs.len()
    }
}

/// `∫ N_m²`, exact by Gauss–Legendre on each knot interval.
pub fn bspline_energy(m: usize) -> f64 {
    let (x, w) = gauss_legendre(m + 1);
    let order = crate::bspline::SplineOrder::new(m as u32).expect("valid order");
    (0..=m)
        .map(|cell| {
            x.iter()
                .zip(&w)
                .map(|(x, w)| {
                    let t = cell as f64 + 0.5 * (x + 1.0);
                    0.5 * w * crate::bspline::eval_cardinal_bspline(order, t).powi(2)
                })
                .sum::<f64>()
        })
        .sum()
}

/// Calls `visit(linear_index, value)` for every basis function of level `k`
/// that is nonzero at `z`.
fn for_each_active(
    basis: &SeriesBasis,
    set: &IndexSet,
    shifts: &[u32],
    z: &[f64],
    mut visit: impl FnMut(usize, f64),
) {
    let d = z.len();
    let m = basis.m.as_usize();
    let mi = m as i64;
    let ext = set.extents();
    let mut idx = Vec::with_capacity(d);
    let mut buf = [0.0; MAX_ORDER as usize + 1];
    for i in 0..d {
        let scale = (1u64 << shifts[i]) as f64;
        let l = active_values(m, scale * z[i], &mut buf[..=m]);
        let mut axis = Vec::with_capacity(m + 1);
        for (r, &v) in buf[..=m].iter().enumerate() {
            let j = l - r as i64;
            if v != 0.0 && j >= -mi && j <= set.upper()[i] {
                axis.push(((j + mi) as usize, v));
            }
        }
        if axis.is_empty() {
            return;
        }
        idx.push(axis);
    }
    let mut counter = vec![0usize; d];
    loop {
        let mut lin = 0usize;
        let mut prod = 1.0;
        for i in 0..d {
            let (c, v) = idx[i][counter[i]];
            lin = lin * ext[i] + c;
            prod *= v;
        }
        visit(lin, prod);
        let mut i = d;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            counter[i] += 1;
            if counter[i] < idx[i].len() {
                break;
            }
            counter[i] = 0;
        }
    }
}

/// A fixed list of basis functions `(k, linear index in J(k))`.
struct Columns {
    basis: SeriesBasis,
    cols: Vec<(u32, usize)>,
    lookup: HashMap<(u32, usize), usize>,
    levels: Vec<(u32, IndexSet, Vec<u32>)>,
}

impl Columns {
    fn new(basis: &SeriesBasis, cols: Vec<(u32, usize)>) -> Result<Self> {
        let lookup = cols.iter().enumerate().map(|(i, c)| (*c, i)).collect();
        let mut level_ids: Vec<u32> = cols.iter().map(|c| c.0).collect();
        level_ids.sort_unstable();
        level_ids.dedup();
        let levels = level_ids
            .into_iter()
            .map(|k| Ok((k, basis.index_set(k)?, basis.beta.level_shifts(k))))
            .collect::<Result<_>>()?;
        Ok(Self {
            basis: basis.clone(),
            cols,
            lookup,
            levels,
        })
    }

    /// Nonzero entries of the design row at `z`.
    fn row(&self, z: &[f64], out: &mut Vec<(usize, f64)>) {
        out.clear();
        for (k, set, shifts) in &self.levels {
            for_each_active(&self.basis, set, shifts, z, |lin, v| {
                if let Some(&c) = self.lookup.get(&(*k, lin)) {
                    out.push((c, v));
                }
            });
        }
    }

    /// Ridge least squares; columns without data get coefficient 0.
    fn solve(&self, zs: &[Vec<f64>], ys: &[f64], ridge: f64) -> Result<Vec<f64>> {
        let p = self.cols.len();
        let mut gram = DMatrix::<f64>::zeros(p, p);
        let mut rhs = vec![0.0; p];
        let mut row = Vec::new();
        for (z, y) in zs.iter().zip(ys) {
            self.row(z, &mut row);
            for &(a, va) in &row {
                rhs[a] += va * y;
                for &(b, vb) in &row {
                    gram[(a, b)] += va * vb;
                }
            }
        }
        let active: Vec<usize> = (0..p).filter(|&c| gram[(c, c)] > 0.0).collect();
        let q = active.len();
        let mut reduced = DMatrix::<f64>::zeros(q, q);
        for (i, &a) in active.iter().enumerate() {
            for (j, &b) in active.iter().enumerate() {
                reduced[(i, j)] = gram[(a, b)];
            }
            reduced[(i, i)] += ridge;
        }
        let b = DVector::from_iterator(q, active.iter().map(|&a| rhs[a]));
        let chol = reduced.cholesky().ok_or_else(|| {
            Error::Singular(format!("{q} x {q} series normal equations with ridge {ridge:e}"))
        })?;
        let sol = chol.solve(&b);
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular("non-finite series coefficients".into()));
        }
        let mut out = vec![0.0; p];
        for (i, &a) in active.iter().enumerate() {
            out[a] = sol[i];
        }
        Ok(out)
    }

    fn to_coeffs(&self, values: &[f64]) -> Result<SparseCoeffs> {
        let mut c = SparseCoeffs::new(self.basis.clone());
        let sets: HashMap<u32, &IndexSet> = self.levels.iter().map(|(k, s, _)| (*k, s)).collect();
        for (&(k, lin), &v) in self.cols.iter().zip(values) {
            if v != 0.0 {
                c.insert(k, sets[&k].location(lin), v)?;
            }
        }
        Ok(c)
    }
}

/// Default ridge parameter `1e−8 · n`.
pub fn default_ridge(n: usize) -> f64 {
    1e-8 * n as f64
}

/// Every basis function of level `k` whose support meets the domain.
fn level_columns(basis: &SeriesBasis, k: u32) -> Result<Vec<(u32, usize)>> {
    let set = basis.index_set(k)?;
    Ok(set
        .iter()
        .enumerate()
        .filter(|(_, j)| j.iter().zip(set.upper()).all(|(ji, u)| ji < u))
        .map(|(lin, _)| (k, lin))
        .collect())
}

/// Number of level-`k` basis functions whose support meets the domain.
pub fn level_size(basis: &SeriesBasis, k: u32) -> Result<usize> {
    let set = basis.index_set(k)?;
    Ok(set
        .upper()
        .iter()
        .map(|&u| (u + basis.m.as_usize() as i64) as usize)
        .product())
}

fn check_inputs(data: &RegressionDataset, clip: f64, ridge: f64) -> Result<()> {
    if data.is_empty() {
        return Err(Error::config("empty dataset"));
    }
    if !(clip > 0.0) {
        return Err(Error::config("clip level F must be positive"));
    }
    if !(ridge >= 0.0) {
        return Err(Error::config("ridge must be non-negative"));
    }
    Ok(())
}

/// Least squares over all basis functions of level `k`.
pub fn fit_nonadaptive_series(
    data: &RegressionDataset,
    basis: &SeriesBasis,
    features: &FeatureMap,
    k: u32,
    clip: f64,
    ridge: f64,
) -> Result<SeriesModel> {
    check_inputs(data, clip, ridge)?;
    features.check(data.dim(), basis.dim())?;
    let zs: Vec<Vec<f64>> = data.xs.iter().map(|x| features.apply(x)).collect();
    let cols = Columns::new(basis, level_columns(basis, k)?)?;
    let values = cols.solve(&zs, &data.ys, ridge)?;
    SeriesModel::new(
        SeriesKind::NonadaptiveSeries,
        data.dim(),
        features.clone(),
        cols.to_coeffs(&values)?,
        clip,
    )
}

/// Base fit at `plan.k`, greedy tail selection by empirical coefficients,
/// joint refit.
///
/// Tail candidates must carry at least a quarter of the empirical energy a
/// uniform design would give them; this keeps bases that see only one or two
/// points at their support edge from dominating the ranking. Tail levels
/// finer than the sample resolution (`n·2^{−‖k‖} < 1`) or above the index cap
/// are skipped.
pub fn fit_adaptive_series(
    data: &RegressionDataset,
    basis: &SeriesBasis,
    features: &FeatureMap,
    plan: &AdaptivePlan,
    clip: f64,
    ridge: f64,
) -> Result<SeriesModel> {
    check_inputs(data, clip, ridge)?;
    features.check(data.dim(), basis.dim())?;
    let zs: Vec<Vec<f64>> = data.xs.iter().map(|x| features.apply(x)).collect();
    let mut cols = level_columns(basis, plan.k)?;
    let base = Columns::new(basis, cols.clone())?;
    let base_values = base.solve(&zs, &data.ys, ridge)?;
    if !plan.has_tail() {
        return SeriesModel::new(
            SeriesKind::AdaptiveSeries,
            data.dim(),
            features.clone(),
            base.to_coeffs(&base_values)?,
            clip,
        );
    }
    let mut row = Vec::new();
    let residual: Vec<f64> = zs
        .iter()
        .zip(&data.ys)
        .map(|(z, y)| {
            base.row(z, &mut row);
            y - row.iter().map(|&(c, v)| base_values[c] * v).sum::<f64>()
        })
        .collect();
    let n = zs.len() as f64;
    let energy = bspline_energy(basis.m.as_usize()).powi(basis.dim() as i32);
    for budget in &plan.budgets {
        let k = budget.k;
        let norm = level_norm(k, &basis.beta);
        if n * (-(norm as f64)).exp2() < 1.0 {
            break;
        }
        let Ok(set) = basis.index_set(k) else { break };
        let shifts = basis.beta.level_shifts(k);
        let mut stats: HashMap<usize, (f64, f64)> = HashMap::new();
        for (z, r) in zs.iter().zip(&residual) {
            for_each_active(basis, &set, &shifts, z, |lin, v| {
                let e = stats.entry(lin).or_insert((0.0, 0.0));
                e.0 += r * v;
                e.1 += v * v;
            });
        }
        let min_energy = 0.25 * n * energy * (-(norm as f64)).exp2();
        let mut ranked: Vec<(usize, f64)> = stats
            .into_iter()
            .filter(|(lin, (_, den))| {
                *den >= min_energy
                    && set
                        .location(*lin)
                        .iter()
                        .zip(set.upper())
                        .all(|(j, u)| j < u)
            })
            .map(|(lin, (num, den))| (lin, num / den))
            .collect();
        ranked.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
        cols.extend(ranked.into_iter().take(budget.n_k as usize).map(|(lin, _)| (k, lin)));
    }
    let joint = Columns::new(basis, cols)?;
    let values = joint.solve(&zs, &data.ys, ridge)?;
    SeriesModel::new(
        SeriesKind::AdaptiveSeries,
        data.dim(),
        features.clone(),
        joint.to_coeffs(&values)?,
        clip,
    )
}

/// Mean squared training residual of the unclipped series.
pub fn training_mse(model: &SeriesModel, data: &RegressionDataset) -> f64 {
    data.xs
        .iter()
        .zip(&data.ys)
        .map(|(x, y)| (model.raw(x) - y).powi(2))
        .sum::<f64>()
        / data.len() as f64
}
