//! Ground-truth targets with controlled smoothness.
//!
//! Series-based generators return [`SparseCoeffs`] normalized to unit
//! `b^β_{p,q}` sequence norm. Composite targets wrap any [`Target`].

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::besov::coeffs::{level_weight, sequence_norm, SeriesBasis, SparseCoeffs};
use crate::besov::params::Exponent;
use crate::bspline::{IndexSet, SmoothnessVec, SplineOrder};
use crate::error::{Error, Result};
use crate::target::{Constant, Target};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Locations of `J(k)` whose basis function is not identically zero on
/// `[0,1]^d`, i.e. `j_i < 2^{⌊kβ′_i⌋}` in every coordinate.
pub fn domain_locations(set: &IndexSet) -> impl Iterator<Item = Vec<i64>> + '_ {
    set.iter()
        .filter(move |j| j.iter().zip(set.upper()).all(|(ji, u)| ji < u))
}

/// `ℓ^p` norm (sup for `p = ∞`).
fn lp_norm<'a>(values: impl Iterator<Item = &'a f64>, p: Exponent) -> f64 {
    if p.is_infinite() {
        values.fold(0.0, |m, v| m.max(v.abs()))
    } else {
        let pv = p.value();
        values.map(|v| v.abs().powf(pv)).sum::<f64>().powf(1.0 / pv)
    }
}

fn normalize(coeffs: SparseCoeffs, p: Exponent, q: Exponent) -> Result<SparseCoeffs> {
    let norm = sequence_norm(&coeffs, p, q);
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::Numerical(format!("cannot normalize a series of norm {norm}")));
    }
    Ok(coeffs.scaled(1.0 / norm))
}

/// How the magnitude of each level of a random series is set before the
/// final normalization.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LevelProfile {
    /// Level `k` is rescaled so that its weighted `ℓ^p` norm in the sequence
    /// norm equals `2^{−decay·k}`.
    #[default]
    Balanced,
    /// Entries are drawn with amplitude `2^{−k(β̲ + decay)}` and not rescaled
    /// per level, so the typical coefficient size does not depend on how many
    /// boundary locations a level has.
    Amplitude,
}

/// Random series on levels `0..=k_deep`, normalized to unit sequence norm.
///
/// Entries are independent uniform `[−1, 1]` draws on every location that
/// meets the domain, scaled per level according to `profile`.
/// `decay = 0` puts equal weight on every level.
pub fn random_series_target(
    basis: &SeriesBasis,
    p: Exponent,
    q: Exponent,
    k_deep: u32,
    profile: LevelProfile,
    decay: f64,
    seed: u64,
) -> Result<SparseCoeffs> {
    let mut rng = rng(seed);
    let mut out = SparseCoeffs::new(basis.clone());
    for k in 0..=k_deep {
        let set = basis.index_set(k)?;
        let entries: Vec<(Vec<i64>, f64)> = domain_locations(&set)
            .map(|j| (j, rng.random_range(-1.0..=1.0)))
            .collect();
        let scale = match profile {
            LevelProfile::Balanced => {
                let raw = lp_norm(entries.iter().map(|(_, a)| a), p);
                if raw == 0.0 {
                    continue;
                }
                (-decay * k as f64).exp2() / (level_weight(k, &basis.beta, p) * raw)
            }
            LevelProfile::Amplitude => (-(k as f64) * (basis.beta.beta_min() + decay)).exp2(),
        };
        for (j, a) in entries {
            out.insert(k, j, a * scale)?;
        }
    }
    normalize(out, p, q)
}

/// Interior locations on the stride-`(m+1)` sublattice: `j_i ∈ (m+1)ℕ` with
/// `j_i + m + 1 ≤ 2^{⌊kβ′_i⌋}`. Their supports lie in `[0,1]^d` and are
/// pairwise disjoint up to boundaries.
pub fn disjoint_lattice(basis: &SeriesBasis, k: u32) -> Result<Vec<Vec<i64>>> {
    let set = basis.index_set(k)?;
    let stride = basis.m.get() as i64 + 1;
    let per_axis: Vec<Vec<i64>> = set
        .upper()
        .iter()
        .map(|&u| (0..).map(|t| t * stride).take_while(|j| j + stride <= u).collect())
        .collect();
    let mut out = vec![Vec::new()];
    for axis in &per_axis {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<i64>| {
                axis.iter().map(move |&j| {
                    let mut v = prefix.clone();
                    v.push(j);
                    v
                })
            })
            .collect();
    }
    Ok(out)
}

/// Parameters of [`spike_target`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpikeSpec {
    pub spike_level: u32,
    pub n_spikes: usize,
    /// Coarse background occupies levels `0..=background_level`.
    #[serde(default)]
    pub background_level: u32,
    /// Sequence norm of the background relative to the spikes; 0 disables it.
    #[serde(default)]
    pub background_weight: f64,
}

/// Isolated fine-level bumps on a smooth coarse background.
///
/// Spikes sit at distinct random points of the disjoint lattice at
/// `spike_level` with random signs and magnitudes in `[1/2, 1]`.
pub fn spike_target(
    basis: &SeriesBasis,
    p: Exponent,
    q: Exponent,
    spec: &SpikeSpec,
    seed: u64,
) -> Result<SparseCoeffs> {
    if spec.n_spikes == 0 {
        return Err(Error::config("n_spikes must be at least 1"));
    }
    let mut lattice = disjoint_lattice(basis, spec.spike_level)?;
    if lattice.len() < spec.n_spikes {
        return Err(Error::config(format!(
            "only {} disjoint spike positions at level {}; use a higher spike level",
            lattice.len(),
            spec.spike_level
        )));
    }
    let mut rng = rng(seed);
    lattice.shuffle(&mut rng);
    let mut spikes = SparseCoeffs::new(basis.clone());
    for j in lattice.into_iter().take(spec.n_spikes) {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        spikes.insert(spec.spike_level, j, sign * rng.random_range(0.5..=1.0))?;
    }
    let mut out = normalize(spikes, p, q)?;
    if spec.background_weight > 0.0 {
        let bg = random_series_target(
            basis,
            p,
            q,
            spec.background_level,
            LevelProfile::Balanced,
            1.0,
            seed ^ 0x9e37_79b9,
        )?
            .scaled(spec.background_weight);
        for (k, j, a) in bg.iter() {
            let v = out.get(k, j) + a;
            out.insert(k, j.clone(), v)?;
        }
        out = normalize(out, p, q)?;
    }
    Ok(out)
}

/// Sign-pattern bumps `Σ_j Δ w_j M_{k,j}` over the disjoint lattice with
/// `Δ = 2^{−kβ̲}`.
pub fn vg_bump_target(basis: &SeriesBasis, k: u32, w: &[bool]) -> Result<SparseCoeffs> {
    let lattice = disjoint_lattice(basis, k)?;
    if w.len() != lattice.len() {
        return Err(Error::Dimension {
            what: "bump pattern",
            expected: lattice.len(),
            got: w.len(),
        });
    }
    let delta = (-(k as f64) * basis.beta.beta_min()).exp2();
    let mut out = SparseCoeffs::new(basis.clone());
    for (j, &on) in lattice.into_iter().zip(w) {
        if on {
            out.insert(k, j, delta)?;
        }
    }
    Ok(out)
}

/// Seeded uniform random bit pattern.
pub fn random_pattern(len: usize, seed: u64) -> Vec<bool> {
    let mut rng = rng(seed);
    (0..len).map(|_| rng.random::<bool>()).collect()
}

/// `h(Ax + b)` for an inner function `h` on `[0,1]^{d̃}`.
#[derive(Clone)]
pub struct AffineTarget {
    inner: Arc<dyn Target>,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    d: usize,
}

impl std::fmt::Debug for AffineTarget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AffineTarget")
            .field("a", &self.a)
            .field("b", &self.b)
            .field("d", &self.d)
            .finish_non_exhaustive()
    }
}

impl AffineTarget {
    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.a
    }

    pub fn offset(&self) -> &[f64] {
        &self.b
    }

    pub fn inner(&self) -> &Arc<dyn Target> {
        &self.inner
    }

    /// `Ax + b`.
    pub fn map(&self, x: &[f64]) -> Vec<f64> {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(row, bi)| bi + row.iter().zip(x).map(|(a, x)| a * x).sum::<f64>())
            .collect()
    }
}

impl Target for AffineTarget {
    fn dim(&self) -> usize {
        self.d
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let y: Vec<f64> = self.map(x).into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        self.inner.eval(&y)
    }
}

/// Builds `h(Ax + b)`, checking that `A[0,1]^d + b ⊆ [0,1]^{d̃}`.
///
/// By affinity the extremes of each row occur at corners of the cube; the
/// check is done row by row and reports the offending corner.
pub fn affine_target(
    inner: Arc<dyn Target>,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    d: usize,
) -> Result<AffineTarget> {
    let d_tilde = inner.dim();
    if a.len() != d_tilde || b.len() != d_tilde {
        return Err(Error::Dimension {
            what: "affine map rows",
            expected: d_tilde,
            got: a.len().min(b.len()),
        });
    }
    if let Some(row) = a.iter().find(|r| r.len() != d) {
        return Err(Error::Dimension {
            what: "affine map columns",
            expected: d,
            got: row.len(),
        });
    }
    const TOL: f64 = 1e-12;
    for (i, (row, bi)) in a.iter().zip(&b).enumerate() {
        let low_corner: Vec<f64> = row.iter().map(|&v| if v < 0.0 { 1.0 } else { 0.0 }).collect();
        let high_corner: Vec<f64> = row.iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect();
        let lo = bi + row.iter().filter(|v| **v < 0.0).sum::<f64>();
        let hi = bi + row.iter().filter(|v| **v > 0.0).sum::<f64>();
        if lo < -TOL {
            return Err(Error::config(format!(
                "affine map leaves [0,1]: row {i} equals {lo} at corner {low_corner:?}"
            )));
        }
        if hi > 1.0 + TOL {
            return Err(Error::config(format!(
                "affine map leaves [0,1]: row {i} equals {hi} at corner {high_corner:?}"
            )));
        }
    }
    Ok(AffineTarget { inner, a, b, d })
}

/// `h_H ∘ … ∘ h_1` where stage `ℓ` has one component function per output
/// coordinate. Outputs of every stage except the last are clipped to `[0,1]`.
#[derive(Clone)]
pub struct DeepTarget {
    stages: Vec<Vec<Arc<dyn Target>>>,
}

impl DeepTarget {
    pub fn stages(&self) -> &[Vec<Arc<dyn Target>>] {
        &self.stages
    }
}

impl Target for DeepTarget {
    fn dim(&self) -> usize {
        self.stages[0][0].dim()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let mut cur = x.to_vec();
        let last = self.stages.len() - 1;
        for (l, stage) in self.stages.iter().enumerate() {
            cur = stage
                .iter()
                .map(|h| {
                    let v = h.eval(&cur);
                    if l < last {
                        v.clamp(0.0, 1.0)
                    } else {
                        v
                    }
                })
                .collect();
        }
        cur[0]
    }
}

/// Chains stages, checking that dimensions match and the last stage is scalar.
pub fn deep_target(stages: Vec<Vec<Arc<dyn Target>>>) -> Result<DeepTarget> {
    if stages.is_empty() || stages.iter().any(Vec::is_empty) {
        return Err(Error::config("deep target needs non-empty stages"));
    }
    for (l, stage) in stages.iter().enumerate() {
        let d_in = stage[0].dim();
        if let Some(h) = stage.iter().find(|h| h.dim() != d_in) {
            return Err(Error::Dimension {
                what: "stage component input",
                expected: d_in,
                got: h.dim(),
            });
        }
        if l > 0 && stages[l - 1].len() != d_in {
            return Err(Error::Dimension {
                what: "stage chaining",
                expected: stages[l - 1].len(),
                got: d_in,
            });
        }
    }
    if stages.last().map(Vec::len) != Some(1) {
        return Err(Error::config("the last stage of a deep target must be scalar"));
    }
    Ok(DeepTarget { stages })
}

fn default_decay() -> f64 {
    1.0
}

fn default_scale() -> f64 {
    1.0
}

fn default_q() -> Exponent {
    Exponent::INFINITY
}

/// Serializable description of a target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetSpec {
    Constant {
        d: usize,
        value: f64,
    },
    Series {
        beta: SmoothnessVec,
        m: SplineOrder,
        p: Exponent,
        #[serde(default = "default_q")]
        q: Exponent,
        k_deep: u32,
        #[serde(default)]
        profile: LevelProfile,
        #[serde(default = "default_decay")]
        decay: f64,
        /// Multiplies every coefficient after normalization.
        #[serde(default = "default_scale")]
        scale: f64,
        seed: u64,
    },
    Spikes {
        beta: SmoothnessVec,
        m: SplineOrder,
        p: Exponent,
        #[serde(default = "default_q")]
        q: Exponent,
        spike_level: u32,
        n_spikes: usize,
        #[serde(default)]
        background_level: u32,
        #[serde(default)]
        background_weight: f64,
        #[serde(default = "default_scale")]
        scale: f64,
        seed: u64,
    },
    VgBumps {
        beta: SmoothnessVec,
        m: SplineOrder,
        level: u32,
        /// Explicit 0/1 pattern; drawn from `seed` when absent.
        #[serde(default)]
        w: Option<Vec<u8>>,
        seed: u64,
    },
    /// Coefficients read from a `besov-coeffs v1` file.
    CoeffsFile {
        path: String,
    },
    AffineComp {
        inner: Box<TargetSpec>,
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
    },
    DeepComp {
        stages: Vec<Vec<TargetSpec>>,
    },
}

/// A constructed target, with its coefficients when it is a single series.
#[derive(Clone)]
pub struct BuiltTarget {
    pub function: Arc<dyn Target>,
    pub coeffs: Option<SparseCoeffs>,
}

impl BuiltTarget {
    fn series(coeffs: SparseCoeffs) -> Result<Self> {
        Ok(Self {
            function: Arc::new(coeffs.evaluator()?),
            coeffs: Some(coeffs),
        })
    }
}

impl TargetSpec {
    /// Constructs the target. Relative file paths resolve against `base_dir`.
    pub fn build(&self, base_dir: &std::path::Path) -> Result<BuiltTarget> {
        match self {
            TargetSpec::Constant { d, value } => Ok(BuiltTarget {
                function: Arc::new(Constant {
                    dim: *d,
                    value: *value,
                }),
                coeffs: None,
            }),
            TargetSpec::Series {
                beta,
                m,
                p,
                q,
                k_deep,
                profile,
                decay,
                scale,
                seed,
            } => {
                let basis = SeriesBasis::new(beta.clone(), *m);
                BuiltTarget::series(
                    random_series_target(&basis, *p, *q, *k_deep, *profile, *decay, *seed)?
                        .scaled(*scale),
                )
            }
            TargetSpec::Spikes {
                beta,
                m,
                p,
                q,
                spike_level,
                n_spikes,
                background_level,
                background_weight,
                scale,
                seed,
            } => {
                let basis = SeriesBasis::new(beta.clone(), *m);
                let spikes = SpikeSpec {
                    spike_level: *spike_level,
                    n_spikes: *n_spikes,
                    background_level: *background_level,
                    background_weight: *background_weight,
                };
                BuiltTarget::series(spike_target(&basis, *p, *q, &spikes, *seed)?.scaled(*scale))
            }
            TargetSpec::VgBumps {
                beta,
                m,
                level,
                w,
                seed,
            } => {
                let basis = SeriesBasis::new(beta.clone(), *m);
                let pattern = match w {
                    Some(bits) => bits.iter().map(|&b| b != 0).collect(),
                    None => random_pattern(disjoint_lattice(&basis, *level)?.len(), *seed),
                };
                BuiltTarget::series(vg_bump_target(&basis, *level, &pattern)?)
            }
            TargetSpec::CoeffsFile { path } => {
                let text = std::fs::read_to_string(base_dir.join(path))?;
                BuiltTarget::series(SparseCoeffs::from_text(&text)?)
            }
            TargetSpec::AffineComp { inner, a, b } => {
                let inner = inner.build(base_dir)?.function;
                let d = a.first().map_or(0, Vec::len);
                Ok(BuiltTarget {
                    function: Arc::new(affine_target(inner, a.clone(), b.clone(), d)?),
                    coeffs: None,
                })
            }
            TargetSpec::DeepComp { stages } => {
                let built = stages
                    .iter()
                    .map(|stage| {
                        stage
                            .iter()
                            .map(|s| s.build(base_dir).map(|t| t.function))
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(BuiltTarget {
                    function: Arc::new(deep_target(built)?),
                    coeffs: None,
                })
            }
        }
    }
}
