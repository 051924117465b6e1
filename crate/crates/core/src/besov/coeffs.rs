use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::besov::params::Exponent;
use crate::bspline::{active_values, index_set, IndexSet, SmoothnessVec, SplineOrder, MAX_ORDER};
use crate::error::{Error, Result};
use crate::target::Target;

/// The dictionary a series is expanded in: anisotropy `β` and spline order `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesBasis {
    pub beta: SmoothnessVec,
    pub m: SplineOrder,
}

impl SeriesBasis {
    pub fn new(beta: SmoothnessVec, m: SplineOrder) -> Self {
        Self { beta, m }
    }

    pub fn dim(&self) -> usize {
        self.beta.dim()
    }

    pub fn index_set(&self, k: u32) -> Result<IndexSet> {
        index_set(k, &self.beta, self.m)
    }
}

/// Sparse B-spline series `Σ_{(k,j)} α_{k,j} M_{k,j}`.
///
/// Entries are kept ordered by level and then lexicographically by location,
/// which fixes the iteration order used by serialization and selection.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCoeffs {
    basis: SeriesBasis,
    levels: BTreeMap<u32, BTreeMap<Vec<i64>, f64>>,
}

impl SparseCoeffs {
    pub fn new(basis: SeriesBasis) -> Self {
        Self {
            basis,
            levels: BTreeMap::new(),
        }
    }

    pub fn basis(&self) -> &SeriesBasis {
        &self.basis
    }

    pub fn beta(&self) -> &SmoothnessVec {
        &self.basis.beta
    }

    pub fn order(&self) -> SplineOrder {
        self.basis.m
    }

    /// Sets `α_{k,j}`. Rejects `j ∉ J(k)`; a zero value removes the entry.
    pub fn insert(&mut self, k: u32, j: Vec<i64>, alpha: f64) -> Result<()> {
        let set = self.basis.index_set(k)?;
        if !set.contains(&j) {
            return Err(Error::config(format!(
                "location {j:?} is not in J({k})"
            )));
        }
        if !alpha.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite coefficient at level {k}, location {j:?}"
            )));
        }
        if alpha == 0.0 {
            if let Some(level) = self.levels.get_mut(&k) {
                level.remove(&j);
                if level.is_empty() {
                    self.levels.remove(&k);
                }
            }
        } else {
            self.levels.entry(k).or_default().insert(j, alpha);
        }
        Ok(())
    }

    pub fn get(&self, k: u32, j: &[i64]) -> f64 {
        self.levels
            .get(&k)
            .and_then(|l| l.get(j))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.levels.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Populated levels in increasing order.
    pub fn levels(&self) -> impl Iterator<Item = u32> + '_ {
        self.levels.keys().copied()
    }

    pub fn max_level(&self) -> Option<u32> {
        self.levels.keys().next_back().copied()
    }

    /// Entries of one level, lexicographic in `j`.
    pub fn level(&self, k: u32) -> impl Iterator<Item = (&Vec<i64>, f64)> + '_ {
        self.levels
            .get(&k)
            .into_iter()
            .flat_map(|l| l.iter().map(|(j, a)| (j, *a)))
    }

    /// All entries ordered by `(k, j)`.
    pub fn iter(&self) -> impl Iterator<Item = (u32, &Vec<i64>, f64)> + '_ {
        self.levels
            .iter()
            .flat_map(|(&k, l)| l.iter().map(move |(j, a)| (k, j, *a)))
    }

    pub fn scaled(&self, c: f64) -> SparseCoeffs {
        let mut out = SparseCoeffs::new(self.basis.clone());
        if c != 0.0 {
            for (&k, level) in &self.levels {
                let scaled = level.iter().map(|(j, a)| (j.clone(), a * c)).collect();
                out.levels.insert(k, scaled);
            }
        }
        out
    }

    /// Entries with `k ≤ max_level`.
    pub fn truncated(&self, max_level: u32) -> SparseCoeffs {
        SparseCoeffs {
            basis: self.basis.clone(),
            levels: self
                .levels
                .range(..=max_level)
                .map(|(k, l)| (*k, l.clone()))
                .collect(),
        }
    }

    /// Coefficient-wise `self − other` (same basis required).
    pub fn difference(&self, other: &SparseCoeffs) -> Result<SparseCoeffs> {
        if self.basis != other.basis {
            return Err(Error::config("series expanded in different bases"));
        }
        let mut out = self.clone();
        for (k, j, a) in other.iter() {
            let v = out.get(k, j) - a;
            out.insert(k, j.clone(), v)?;
        }
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().map(|(_, _, a)| a.abs()).fold(0.0, f64::max)
    }

    pub fn abs_sum(&self) -> f64 {
        self.iter().map(|(_, _, a)| a.abs()).sum()
    }

    /// Compiles the series into per-level lookup tables for fast evaluation.
    pub fn evaluator(&self) -> Result<SeriesEvaluator> {
        SeriesEvaluator::new(self)
    }

    /// Serializes to the line-oriented `besov-coeffs v1` text format.
    pub fn to_text(&self) -> String {
        let beta = self
            .basis
            .beta
            .as_slice()
            .iter()
            .map(|b| format!("{b:?}"))
            .collect::<Vec<_>>()
            .join(",");
        let mut out = format!(
            "besov-coeffs v1; d={}; m={}; beta={}\n",
            self.basis.dim(),
            self.basis.m.get(),
            beta
        );
        for (k, j, a) in self.iter() {
            let _ = write!(out, "{k}");
            for ji in j {
                let _ = write!(out, " {ji}");
            }
            let _ = writeln!(out, " {a:?}");
        }
        out
    }

    /// Parses the `besov-coeffs v1` text format.
    pub fn from_text(text: &str) -> Result<SparseCoeffs> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "empty input".into(),
        })?;
        let header_err = |msg: &str| Error::Parse {
            line: 1,
            msg: msg.to_string(),
        };
        let mut fields = header.split(';').map(str::trim);
        if fields.next() != Some("besov-coeffs v1") {
            return Err(header_err("expected header 'besov-coeffs v1'"));
        }
        let mut d = None;
        let mut m = None;
        let mut beta = None;
        for field in fields {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| header_err("malformed header field"))?;
            match key.trim() {
                "d" => d = value.trim().parse::<usize>().ok(),
                "m" => m = value.trim().parse::<u32>().ok(),
                "beta" => {
                    beta = value
                        .split(',')
                        .map(|b| b.trim().parse::<f64>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .ok()
                }
                _ => return Err(header_err("unknown header field")),
            }
        }
        let d = d.ok_or_else(|| header_err("missing or invalid d"))?;
        let m = m.ok_or_else(|| header_err("missing or invalid m"))?;
        let beta = beta.ok_or_else(|| header_err("missing or invalid beta"))?;
        if beta.len() != d {
            return Err(header_err("beta length differs from d"));
        }
        let basis = SeriesBasis::new(SmoothnessVec::new(beta)?, SplineOrder::new(m)?);
        let mut coeffs = SparseCoeffs::new(basis);
        for (idx, line) in lines {
            let line_no = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let parts: Vec<&str> = trimmed.split_whitespace().collect();
            if parts.len() != d + 2 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected {} fields, found {}", d + 2, parts.len()),
                });
            }
            let bad = |what: &str| Error::Parse {
                line: line_no,
                msg: format!("invalid {what}"),
            };
            let k = parts[0].parse::<u32>().map_err(|_| bad("level"))?;
            let j = parts[1..=d]
                .iter()
                .map(|s| s.parse::<i64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad("location"))?;
            let alpha = parts[d + 1].parse::<f64>().map_err(|_| bad("coefficient"))?;
            coeffs.insert(k, j, alpha).map_err(|e| Error::Parse {
                line: line_no,
                msg: e.to_string(),
            })?;
        }
        Ok(coeffs)
    }
}

impl Target for SparseCoeffs {
    fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Direct evaluation by map lookups. Prefer [`SparseCoeffs::evaluator`]
    /// when evaluating many points.
    fn eval(&self, x: &[f64]) -> f64 {
        let d = self.basis.dim();
        let m = self.basis.m.as_usize();
        let mut vals = vec![[0.0; MAX_ORDER as usize + 1]; d];
        let mut first = vec![0i64; d];
        let mut total = 0.0;
        for (&k, level) in &self.levels {
            for i in 0..d {
                let scale = (1u64 << self.basis.beta.level_shift(k, i)) as f64;
                first[i] = active_values(m, scale * x[i], &mut vals[i][..=m]);
            }
            for (j, a) in level {
                let mut prod = *a;
                for i in 0..d {
                    let r = first[i] - j[i];
                    if r < 0 || r > m as i64 {
                        prod = 0.0;
                        break;
                    }
                    prod *= vals[i][r as usize];
                }
                total += prod;
            }
        }
        total
    }
}

/// The `b^β_{p,q}` sequence quasi-norm
/// `{Σ_k [2^{kβ̲ − ‖k‖/p} (Σ_j |α_{k,j}|^p)^{1/p}]^q}^{1/q}`,
/// with the usual sup modifications for `p = ∞` or `q = ∞`.
pub fn sequence_norm(coeffs: &SparseCoeffs, p: Exponent, q: Exponent) -> f64 {
    let beta = coeffs.beta();
    let mut terms = Vec::new();
    for k in coeffs.levels() {
        let inner = if p.is_infinite() {
            coeffs.level(k).map(|(_, a)| a.abs()).fold(0.0, f64::max)
        } else {
            let pv = p.value();
            coeffs
                .level(k)
                .map(|(_, a)| a.abs().powf(pv))
                .sum::<f64>()
                .powf(1.0 / pv)
        };
        terms.push(level_weight(k, beta, p) * inner);
    }
    combine_levels(&terms, q)
}

/// `2^{kβ̲ − ‖k‖_{β̲/β}/p}`.
pub fn level_weight(k: u32, beta: &SmoothnessVec, p: Exponent) -> f64 {
    let norm = crate::bspline::level_norm(k, beta) as f64;
    (k as f64 * beta.beta_min() - norm * p.recip()).exp2()
}

fn combine_levels(terms: &[f64], q: Exponent) -> f64 {
    if q.is_infinite() {
        terms.iter().copied().fold(0.0, f64::max)
    } else {
        let qv = q.value();
        terms.iter().map(|t| t.powf(qv)).sum::<f64>().powf(1.0 / qv)
    }
}

enum Storage {
    Dense(Vec<f64>),
    Sparse(HashMap<usize, f64>),
}

struct LevelTable {
    scales: Vec<f64>,
    upper: Vec<i64>,
    strides: Vec<usize>,
    storage: Storage,
}

/// Fast evaluator for a fixed [`SparseCoeffs`].
///
/// Each level is stored densely over `J(k)` when that is cheap and in a hash
/// map otherwise; a point touches at most `(m+1)^d` entries per level.
pub struct SeriesEvaluator {
    d: usize,
    m: usize,
    levels: Vec<LevelTable>,
}

const DENSE_LIMIT: usize = 1 << 22;

impl SeriesEvaluator {
    fn new(coeffs: &SparseCoeffs) -> Result<Self> {
        let basis = coeffs.basis();
        let d = basis.dim();
        let m = basis.m.as_usize();
        let mut levels = Vec::new();
        for k in coeffs.levels() {
            let set = basis.index_set(k)?;
            let ext = set.extents();
            let mut strides = vec![1usize; d];
            for i in (0..d.saturating_sub(1)).rev() {
                strides[i] = strides[i + 1] * ext[i + 1];
            }
            let count = coeffs.levels[&k].len();
            let storage = if set.len() <= DENSE_LIMIT.max(4 * count) {
                let mut dense = vec![0.0; set.len()];
                for (j, a) in coeffs.level(k) {
                    dense[set.linear_index(j).expect("stored index in J(k)")] = a;
                }
                Storage::Dense(dense)
            } else {
                Storage::Sparse(
                    coeffs
                        .level(k)
                        .map(|(j, a)| (set.linear_index(j).expect("stored index in J(k)"), a))
                        .collect(),
                )
            };
            levels.push(LevelTable {
                scales: (0..d)
                    .map(|i| (1u64 << basis.beta.level_shift(k, i)) as f64)
                    .collect(),
                upper: set.upper().to_vec(),
                strides,
                storage,
            });
        }
        Ok(Self { d, m, levels })
    }
}

impl Target for SeriesEvaluator {
    fn dim(&self) -> usize {
        self.d
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let d = self.d;
        let m = self.m;
        let mi = m as i64;
        // per coordinate: (offset contribution, basis value) of active splines
        let mut offsets = [[0usize; MAX_ORDER as usize + 1]; 16];
        let mut values = [[0.0f64; MAX_ORDER as usize + 1]; 16];
        let mut counts = [0usize; 16];
        let mut heap_offsets;
        let mut heap_values;
        let mut heap_counts;
        let (offsets, values, counts): (&mut [_], &mut [_], &mut [usize]) = if d <= 16 {
            (&mut offsets[..d], &mut values[..d], &mut counts[..d])
        } else {
            heap_offsets = vec![[0usize; MAX_ORDER as usize + 1]; d];
            heap_values = vec![[0.0f64; MAX_ORDER as usize + 1]; d];
            heap_counts = vec![0usize; d];
            (&mut heap_offsets, &mut heap_values, &mut heap_counts)
        };
        let mut buf = [0.0; MAX_ORDER as usize + 1];
        let mut total = 0.0;
        'levels: for table in &self.levels {
            for i in 0..d {
                let l = active_values(m, table.scales[i] * x[i], &mut buf[..=m]);
                let mut c = 0;
                for (r, &v) in buf[..=m].iter().enumerate() {
                    let j = l - r as i64;
                    if v != 0.0 && j >= -mi && j <= table.upper[i] {
                        offsets[i][c] = (j + mi) as usize * table.strides[i];
                        values[i][c] = v;
                        c += 1;
                    }
                }
                if c == 0 {
                    continue 'levels;
                }
                counts[i] = c;
            }
            total += match &table.storage {
                Storage::Dense(coef) => {
                    tensor_sum(d, counts, offsets, values, |idx| coef[idx])
                }
                Storage::Sparse(map) => tensor_sum(d, counts, offsets, values, |idx| {
                    map.get(&idx).copied().unwrap_or(0.0)
                }),
            };
        }
        total
    }
}

/// `Σ_{r ∈ Π [0, counts_i)} coef(Σ_i offsets[i][r_i]) Π_i values[i][r_i]`.
fn tensor_sum(
    d: usize,
    counts: &[usize],
    offsets: &[[usize; MAX_ORDER as usize + 1]],
    values: &[[f64; MAX_ORDER as usize + 1]],
    coef: impl Fn(usize) -> f64,
) -> f64 {
    if d == 1 {
        return (0..counts[0])
            .map(|r| coef(offsets[0][r]) * values[0][r])
            .sum();
    }
    if d == 2 {
        let mut s = 0.0;
        for a in 0..counts[0] {
            let mut inner = 0.0;
            for b in 0..counts[1] {
                inner += coef(offsets[0][a] + offsets[1][b]) * values[1][b];
            }
            s += inner * values[0][a];
        }
        return s;
    }
    let mut idx = vec![0usize; d];
    let mut s = 0.0;
    loop {
        let mut off = 0;
        let mut prod = 1.0;
        for i in 0..d {
            off += offsets[i][idx[i]];
            prod *= values[i][idx[i]];
        }
        s += coef(off) * prod;
        let mut i = d;
        loop {
            if i == 0 {
                return s;
            }
            i -= 1;
            idx[i] += 1;
            if idx[i] < counts[i] {
                break;
            }
            idx[i] = 0;
        }
    }
}
