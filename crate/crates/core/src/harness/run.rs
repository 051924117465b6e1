//! Experiment execution and output files.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::adaptive::approximation_rate_study;
use crate::besov::coeffs::{SeriesBasis, SparseCoeffs};
use crate::besov::params::BesovParams;
use crate::error::{Error, Result};
use crate::estimators::{
    compare, estimation_rate_study, isotropic_exponent, rate_affine, rate_deep,
    rate_linear_lower, AffineRate, Comparison, DeepRate, LinearLowerRate, RunRecord,
};
use crate::harness::config::{
    ApproxRateConfig, CompareConfig, EstRateConfig, ExperimentConfig, NetSynthConfig,
    RatesConfig, TheorySpec,
};
use crate::quadrature::QuadratureSpec;
use crate::relu::budget::{budget_certificate, covering_number_bound, gadget_depth, gadget_width};
use crate::relu::{assemble_approximant, build_bspline_net, BudgetCertificate, NetStats};
use crate::report::{config_hash, RateReport};
use crate::synth::{domain_locations, TargetSpec};
use crate::target::Target;

/// One output file.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: &'static str,
    pub bytes: Vec<u8>,
}

/// Everything a run produces. `summary` and the artifacts are deterministic;
/// the wall time goes to a separate sidecar.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub artifacts: Vec<Artifact>,
    pub summary: String,
    pub wall_seconds: f64,
}

impl RunOutput {
    pub fn artifact(&self, name: &str) -> Option<&[u8]> {
        self.artifacts
            .iter()
            .find(|a| a.name == name)
            .map(|a| a.bytes.as_slice())
    }

    /// Writes the artifacts and `timing.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for a in &self.artifacts {
            std::fs::write(dir.join(a.name), &a.bytes)?;
        }
        let timing = serde_json::json!({ "wall_seconds": self.wall_seconds });
        std::fs::write(dir.join("timing.json"), pretty(&timing)?)?;
        Ok(())
    }
}

fn pretty<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn artifact(name: &'static str, bytes: Vec<u8>) -> Artifact {
    Artifact { name, bytes }
}

/// Runs `f` on a pool of `jobs` worker threads.
pub fn with_jobs<R: Send>(jobs: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    if jobs == 0 {
        return Err(Error::config("--jobs must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Runs an experiment. Relative paths inside the config resolve against
/// `base_dir`.
pub fn run(config: &ExperimentConfig, base_dir: &Path) -> Result<RunOutput> {
    let start = Instant::now();
    let hash = config_hash(config)?;
    let (artifacts, summary) = match config {
        ExperimentConfig::ApproxRate(c) => approx_rate(c, base_dir, &hash)?,
        ExperimentConfig::EstRate(c) => est_rate(c, base_dir, &hash)?,
        ExperimentConfig::Compare(c) => compare_cmd(c, base_dir, &hash)?,
        ExperimentConfig::NetSynth(c) => net_synth(c, base_dir, &hash)?,
        ExperimentConfig::Rates(c) => rates(c, &hash)?,
    };
    Ok(RunOutput {
        artifacts,
        summary,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

fn rate_summary(r: &RateReport) -> String {
    match (r.exponent_fit, r.relative_deviation) {
        (Some(fit), Some(dev)) => format!(
            "{}: fitted exponent {fit:.4}, theory {:.4}, relative deviation {:.1}%",
            r.experiment,
            r.exponent_theory,
            100.0 * dev
        ),
        _ => format!(
            "{}: no exponent fitted ({})",
            r.experiment,
            r.reason.as_deref().unwrap_or("unknown")
        ),
    }
}

/// `c` times the partition of unity at level 0.
fn constant_series(basis: SeriesBasis, c: f64) -> Result<SparseCoeffs> {
    let mut coeffs = SparseCoeffs::new(basis.clone());
    if c != 0.0 {
        for j in domain_locations(&basis.index_set(0)?) {
            coeffs.insert(0, j, c)?;
        }
    }
    Ok(coeffs)
}

fn approx_rate(c: &ApproxRateConfig, base: &Path, hash: &str) -> Result<(Vec<Artifact>, String)> {
    let built = c.target.build(base)?;
    let coeffs = match (built.coeffs, &c.target) {
        (Some(coeffs), _) => coeffs,
        (None, TargetSpec::Constant { d, value }) => {
            let (Some(beta), Some(m)) = (&c.beta, c.m) else {
                return Err(Error::config("a constant target needs `beta` and `m`"));
            };
            if beta.dim() != *d {
                return Err(Error::Dimension {
                    what: "beta",
                    expected: *d,
                    got: beta.dim(),
                });
            }
            constant_series(SeriesBasis::new(beta.clone(), m), *value)?
        }
        (None, _) => {
            return Err(Error::config(
                "approx-rate needs a series target (series, spikes, vg-bumps, coeffs-file or constant)",
            ))
        }
    };
    let basis = coeffs.basis();
    if c.beta.as_ref().is_some_and(|b| b != &basis.beta) || c.m.is_some_and(|m| m != basis.m) {
        return Err(Error::config("`beta` and `m` must match the target series"));
    }
    let params = if c.relax_order {
        BesovParams::with_relaxed_order(c.p, c.q, c.r, basis.beta.clone(), basis.m)?
    } else {
        BesovParams::new(c.p, c.q, c.r, basis.beta.clone(), basis.m)?
    };
    let d = basis.dim();
    let quad = c
        .quadrature
        .clone()
        .unwrap_or_else(|| QuadratureSpec::default_for(d, c.seed));
    quad.validate(d)?;
    let report = approximation_rate_study(&coeffs, &c.k_list, &params, &quad, c.seed)?
        .with_config_hash(hash.to_string());
    let summary = rate_summary(&report);
    Ok((
        vec![
            artifact("report.json", report.to_json()?.into_bytes()),
            artifact("points.csv", report.to_csv().into_bytes()),
        ],
        summary,
    ))
}

/// Smoothness of the series underlying a target, when there is one.
fn series_beta(spec: &TargetSpec, base: &Path) -> Result<Option<crate::bspline::SmoothnessVec>> {
    Ok(match spec {
        TargetSpec::Series { beta, .. }
        | TargetSpec::Spikes { beta, .. }
        | TargetSpec::VgBumps { beta, .. } => Some(beta.clone()),
        TargetSpec::CoeffsFile { .. } => spec.build(base)?.coeffs.map(|c| c.beta().clone()),
        TargetSpec::AffineComp { inner, .. } => series_beta(inner, base)?,
        TargetSpec::Constant { .. } | TargetSpec::DeepComp { .. } => None,
    })
}

/// The law and exponent an estimation study is compared against.
pub fn theory_exponent(theory: &TheorySpec) -> Result<(String, f64)> {
    Ok(match theory {
        TheorySpec::Affine { beta } => {
            let r = rate_affine(2.0, beta)?;
            (
                format!(
                    "risk ~ n^(-2 beta_tilde/(2 beta_tilde + 1)), beta_tilde = {}",
                    r.beta_tilde
                ),
                r.exponent,
            )
        }
        TheorySpec::Isotropic { beta0, d } => (
            format!("risk ~ n^(-2 beta0/(2 beta0 + d)), beta0 = {beta0}, d = {d}"),
            isotropic_exponent(*beta0, *d),
        ),
        TheorySpec::Deep { betas, p, eps } => {
            let r = rate_deep(2.0, betas, *p, *eps)?;
            (
                format!(
                    "risk ~ n^(-2 b/(2 b + 1)), b = min over stages of the propagated smoothness = {}",
                    r.beta_star_star
                ),
                r.exponent,
            )
        }
        TheorySpec::Explicit { exponent } => (format!("risk ~ n^({exponent})"), *exponent),
    })
}

fn runs_csv(runs: &[RunRecord]) -> String {
    let mut out = String::from("estimator,n,replicate,seed,selected,size,risk,risk_stderr\n");
    for r in runs {
        out.push_str(&format!(
            "{},{},{},{},{},{},{:?},{:?}\n",
            r.estimator, r.n, r.replicate, r.seed, r.selected, r.size, r.risk, r.risk_stderr
        ));
    }
    out
}

fn est_rate(c: &EstRateConfig, base: &Path, hash: &str) -> Result<(Vec<Artifact>, String)> {
    let theory = match &c.theory {
        Some(t) => t.clone(),
        None => match series_beta(&c.target, base)? {
            Some(beta) => TheorySpec::Affine { beta },
            None => {
                return Err(Error::config(
                    "cannot derive a rate for this target; add a [theory] table",
                ))
            }
        },
    };
    let (law, exponent) = theory_exponent(&theory)?;
    let f = c.target.build(base)?.function;
    let opts = c.study.options(c.seed);
    let result = estimation_rate_study(&*f, &c.estimator, &c.n_list, &opts, &law, exponent)?;
    let mut report = result.report.with_config_hash(hash.to_string());
    if c.study.sigma == 0.0 {
        report.note("noise-free data");
    }
    let summary = rate_summary(&report);
    Ok((
        vec![
            artifact("report.json", report.to_json()?.into_bytes()),
            artifact("points.csv", report.to_csv().into_bytes()),
            artifact("runs.csv", runs_csv(&result.runs).into_bytes()),
        ],
        summary,
    ))
}

/// Exponents of the adaptive rate and the linear lower bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidebar {
    pub adaptive: AffineRate,
    pub linear: LinearLowerRate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub experiment: String,
    pub estimators: Vec<String>,
    pub rows: Vec<Comparison>,
    /// Evaluated at the largest `n`.
    pub sidebar: Option<Sidebar>,
    pub seed: u64,
    pub config_hash: String,
}

fn compare_cmd(c: &CompareConfig, base: &Path, hash: &str) -> Result<(Vec<Artifact>, String)> {
    let f = c.target.build(base)?.function;
    if c.n_list.is_empty() {
        return Err(Error::config("n_list is empty"));
    }
    let opts = c.study.options(c.seed);
    let rows = c
        .n_list
        .iter()
        .map(|&n| compare(&*f, &c.estimators, n, &opts, c.equal_budget))
        .collect::<Result<Vec<_>>>()?;
    let n_max = *c.n_list.iter().max().expect("non-empty") as f64;
    let sidebar = c
        .sidebar
        .as_ref()
        .map(|s| -> Result<Sidebar> {
            Ok(Sidebar {
                adaptive: rate_affine(n_max, &s.beta)?,
                linear: rate_linear_lower(
                    n_max,
                    f.dim(),
                    s.d_tilde,
                    &s.beta,
                    s.p,
                    s.kappa,
                )?,
            })
        })
        .transpose()?;
    let report = CompareReport {
        experiment: "compare".into(),
        estimators: c.estimators.iter().map(|e| e.name().to_string()).collect(),
        rows,
        sidebar,
        seed: c.seed,
        config_hash: hash.to_string(),
    };
    let mut csv = String::from("n,estimator,index,mean_risk,stderr,first_wins\n");
    let mut summary = String::new();
    for row in &report.rows {
        for (e, runs) in row.runs.iter().enumerate() {
            let k = runs.len() as f64;
            let mean = row.means[e];
            let var = runs.iter().map(|r| (r.risk - mean).powi(2)).sum::<f64>() / (k - 1.0).max(1.0);
            let wins = if e == 0 { String::new() } else { row.first_wins[e - 1].to_string() };
            csv.push_str(&format!(
                "{},{},{e},{mean:?},{:?},{wins}\n",
                row.n,
                report.estimators[e],
                (var / k).sqrt()
            ));
        }
        let means: Vec<String> = row.means.iter().map(|m| format!("{m:.4e}")).collect();
        summary.push_str(&format!("n = {}: mean risks {}\n", row.n, means.join(" / ")));
    }
    Ok((
        vec![
            artifact("report.json", pretty(&report)?),
            artifact("points.csv", csv.into_bytes()),
        ],
        summary.trim_end().to_string(),
    ))
}

/// Architecture bounds of a single gadget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GadgetCertificate {
    pub m: u32,
    pub d: usize,
    pub eps: f64,
    pub c: f64,
    pub squaring_steps: u32,
    pub error_bound: f64,
    pub measured_error: f64,
    pub verification_points: usize,
    pub stats: NetStats,
    /// `W_0 = 6dm(m+2) + 2d`
    pub width_formula: u64,
    /// `3 + 2⌈log₂(3^{d∨m}/(εc)) + 5⌉⌈log₂(d∨m)⌉`
    pub depth_formula: u64,
    /// `(L − 1) W_0² + 1` at the formula depth.
    pub nonzeros_formula: u64,
    pub delta: f64,
    pub log_covering_bound: f64,
}

/// Budget of a series approximant, formula and measured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesCertificate {
    pub entries: usize,
    pub eps_unit: f64,
    pub sum_bound: f64,
    pub active_bound: f64,
    pub measured_error: f64,
    pub check_points: usize,
    pub stats: NetStats,
    pub budget: BudgetCertificate,
    pub delta: f64,
    pub log_covering_bound: f64,
}

fn covering(stats: &NetStats, delta: f64) -> Result<f64> {
    covering_number_bound(
        stats.depth as u64,
        stats.width as u64,
        stats.nonzeros as u64,
        stats.max_abs,
        delta,
    )
}

fn net_synth(c: &NetSynthConfig, base: &Path, hash: &str) -> Result<(Vec<Artifact>, String)> {
    match (&c.gadget, &c.series) {
        (Some(g), None) => {
            let built = build_bspline_net(g.m, g.d, g.eps)?;
            let stats = built.net.stats();
            let (d, m) = (g.d as u64, u64::from(g.m.get()));
            let w0 = gadget_width(d, m);
            let l1 = gadget_depth(d, m, g.eps, c.c);
            let cert = GadgetCertificate {
                m: g.m.get(),
                d: g.d,
                eps: g.eps,
                c: c.c,
                squaring_steps: built.squaring_steps,
                error_bound: built.error_bound,
                measured_error: built.measured_error,
                verification_points: built.verification_points,
                stats,
                width_formula: w0,
                depth_formula: l1,
                nonzeros_formula: (l1 - 1) * w0 * w0 + 1,
                delta: c.delta,
                log_covering_bound: covering(&stats, c.delta)?,
            };
            let summary = format!(
                "gadget m = {}, d = {}: measured error {:.3e} <= eps = {:e}; L = {}, W = {}, S = {}, B = {}",
                cert.m, cert.d, cert.measured_error, cert.eps, stats.depth, stats.width, stats.nonzeros, stats.max_abs
            );
            let report = serde_json::json!({
                "experiment": "net-synth",
                "mode": "gadget",
                "measured_error": cert.measured_error,
                "eps": cert.eps,
                "stats": stats,
                "seed": c.seed,
                "config_hash": hash,
            });
            Ok((
                vec![
                    artifact("report.json", pretty(&report)?),
                    artifact("network.json", (built.net.to_json()? + "\n").into_bytes()),
                    artifact("certificate.json", pretty(&cert)?),
                ],
                summary,
            ))
        }
        (None, Some(s)) => {
            let text = std::fs::read_to_string(base.join(&s.coeffs))?;
            let coeffs = SparseCoeffs::from_text(&text)?;
            if coeffs.len() < 2 {
                return Err(Error::config("series needs at least 2 coefficients"));
            }
            let basis = coeffs.basis();
            let params =
                BesovParams::with_relaxed_order(s.p, s.q, s.r, basis.beta.clone(), basis.m)?;
            let approx = assemble_approximant(&coeffs, s.eps_unit)?;
            let exact = coeffs.evaluator()?;
            let d = basis.dim();
            let (points, _) = QuadratureSpec::default_for(d, c.seed).nodes(d);
            let mut measured: f64 = 0.0;
            let mut worst = Vec::new();
            for x in &points {
                let e = (approx.net.eval_scalar(x) - exact.eval(x)).abs();
                if e > measured {
                    measured = e;
                    worst = x.clone();
                }
            }
            if measured > approx.sum_bound * (1.0 + 1e-9) + 1e-12 {
                return Err(Error::Verification {
                    measured,
                    tolerance: approx.sum_bound,
                    point: worst,
                });
            }
            let stats = approx.net.stats();
            let cert = SeriesCertificate {
                entries: approx.entries,
                eps_unit: s.eps_unit,
                sum_bound: approx.sum_bound,
                active_bound: approx.active_bound,
                measured_error: measured,
                check_points: points.len(),
                stats,
                budget: budget_certificate(approx.entries as u64, &params, c.c)?,
                delta: c.delta,
                log_covering_bound: covering(&stats, c.delta)?,
            };
            let summary = format!(
                "series with {} terms: measured error {:.3e} <= {:.3e}; L = {}, W = {}, S = {}",
                cert.entries, measured, cert.sum_bound, stats.depth, stats.width, stats.nonzeros
            );
            let report = serde_json::json!({
                "experiment": "net-synth",
                "mode": "series",
                "measured_error": measured,
                "sum_bound": cert.sum_bound,
                "stats": stats,
                "seed": c.seed,
                "config_hash": hash,
            });
            Ok((
                vec![
                    artifact("report.json", pretty(&report)?),
                    artifact("network.json", (approx.net.to_json()? + "\n").into_bytes()),
                    artifact("certificate.json", pretty(&cert)?),
                ],
                summary,
            ))
        }
        _ => Err(Error::config("net-synth needs exactly one of [gadget] or [series]")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatesReport {
    pub experiment: String,
    pub n: f64,
    pub affine: Option<AffineRate>,
    pub deep: Option<DeepRate>,
    pub linear: Option<LinearLowerRate>,
    pub config_hash: String,
}

fn rates(c: &RatesConfig, hash: &str) -> Result<(Vec<Artifact>, String)> {
    let affine = c.beta.as_ref().map(|b| rate_affine(c.n, b)).transpose()?;
    let deep = c
        .deep
        .as_ref()
        .map(|s| rate_deep(c.n, &s.betas, s.p, s.eps))
        .transpose()?;
    let linear = match (&c.linear, &c.beta) {
        (Some(l), Some(b)) => Some(rate_linear_lower(
            c.n,
            l.d,
            l.d_tilde,
            b,
            l.p,
            l.kappa,
        )?),
        (Some(_), None) => return Err(Error::config("[linear] needs `beta`")),
        (None, _) => None,
    };
    if affine.is_none() && deep.is_none() {
        return Err(Error::config("rates needs `beta` or a [deep] table"));
    }
    let mut lines = Vec::new();
    if let Some(a) = &affine {
        lines.push(format!(
            "affine composition: beta_tilde = {}, exponent = {}, rate = {:e}, with log^3 = {:e}",
            a.beta_tilde, a.exponent, a.rate, a.rate_log3
        ));
    }
    if let Some(dp) = &deep {
        lines.push(format!(
            "deep composition: effective smoothness = {} (stage {}), exponent = {}, rate = {:e}",
            dp.beta_star_star, dp.binding, dp.exponent, dp.rate
        ));
    }
    if let Some(l) = &linear {
        lines.push(format!(
            "linear lower bounds: non-adaptive exponent = {}, affine-hull exponent = {} (s = {})",
            l.nonadaptive_exponent, l.affine_hull_exponent, l.s
        ));
    }
    let report = RatesReport {
        experiment: "rates".into(),
        n: c.n,
        affine,
        deep,
        linear,
        config_hash: hash.to_string(),
    };
    Ok((vec![artifact("report.json", pretty(&report)?)], lines.join("\n")))
}
