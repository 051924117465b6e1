//! Log-log slope reports shared by the approximation and estimation studies.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Errors at or below this level are treated as exact and not fitted.
pub const NOISE_FLOOR: f64 = 1e-12;

/// Minimum number of points for a reported slope.
pub const MIN_FIT_POINTS: usize = 4;

/// One `(budget, error)` observation. The budget is the parameter count `N`
/// for approximation studies and the sample size `n` for estimation studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    #[serde(rename = "N")]
    pub budget: f64,
    pub error: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
}

/// Ordinary least-squares fit `log error ≈ intercept + slope · log budget`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
}

/// Fits a line through `(ln x, ln y)`.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<LogLogFit> {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    ols(&lx, &ly)
}

fn ols(x: &[f64], y: &[f64]) -> Result<LogLogFit> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::config("degenerate fit: fewer than 2 distinct budgets"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok(LogLogFit {
        slope,
        intercept: my - slope * mx,
    })
}

/// A fitted rate compared against its theoretical exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub experiment: String,
    /// The law being tested, e.g. `"error ~ N^(-beta_tilde)"`.
    pub theory: String,
    pub exponent_theory: f64,
    pub exponent_fit: Option<f64>,
    pub intercept_fit: Option<f64>,
    pub relative_deviation: Option<f64>,
    /// Why no exponent was fitted: `below-noise-floor` or `too-few-points`.
    pub reason: Option<String>,
    pub points: Vec<RatePoint>,
    pub residuals: Vec<f64>,
    pub residual_sse: Option<f64>,
    pub seed: u64,
    pub config_hash: String,
    pub notes: Vec<String>,
}

impl RateReport {
    /// Sorts the points by budget and fits the slope when possible.
    pub fn build(
        experiment: impl Into<String>,
        theory: impl Into<String>,
        exponent_theory: f64,
        mut points: Vec<RatePoint>,
        seed: u64,
    ) -> Result<Self> {
        points.sort_by(|a, b| a.budget.total_cmp(&b.budget));
        let mut distinct = points.iter().map(|p| p.budget).collect::<Vec<_>>();
        distinct.dedup();
        if distinct.len() < 2 {
            return Err(Error::config("degenerate fit: fewer than 2 distinct budgets"));
        }
        let mut report = RateReport {
            experiment: experiment.into(),
            theory: theory.into(),
            exponent_theory,
            exponent_fit: None,
            intercept_fit: None,
            relative_deviation: None,
            reason: None,
            points,
            residuals: Vec::new(),
            residual_sse: None,
            seed,
            config_hash: String::new(),
            notes: Vec::new(),
        };
        if report.points.iter().any(|p| !(p.error > NOISE_FLOOR)) {
            report.reason = Some("below-noise-floor".into());
            return Ok(report);
        }
        if report.points.len() < MIN_FIT_POINTS {
            report.reason = Some("too-few-points".into());
            return Ok(report);
        }
        let xs: Vec<f64> = report.points.iter().map(|p| p.budget).collect();
        let ys: Vec<f64> = report.points.iter().map(|p| p.error).collect();
        let fit = fit_loglog(&xs, &ys)?;
        report.residuals = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| y.ln() - (fit.intercept + fit.slope * x.ln()))
            .collect();
        report.residual_sse = Some(report.residuals.iter().map(|r| r * r).sum());
        report.exponent_fit = Some(fit.slope);
        report.intercept_fit = Some(fit.intercept);
        report.relative_deviation = Some(relative_deviation(fit.slope, exponent_theory));
        Ok(report)
    }

    pub fn with_config_hash(mut self, hash: String) -> Self {
        self.config_hash = hash;
        self
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// `N,error` table.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,error\n");
        for p in &self.points {
            out.push_str(&format!("{:?},{:?}\n", p.budget, p.error));
        }
        out
    }

    /// `|fit − theory| / |theory|`, when a slope was fitted.
    pub fn within(&self, tolerance: f64) -> bool {
        self.relative_deviation.is_some_and(|d| d <= tolerance)
    }
}

pub fn relative_deviation(fit: f64, theory: f64) -> f64 {
    (fit - theory).abs() / theory.abs()
}

/// Hex SHA-256 of a serializable value's compact JSON encoding.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let json = serde_json::to_vec(value)?;
    let digest = Sha256::digest(&json);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}
