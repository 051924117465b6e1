//! TOML experiment configurations.

use serde::{Deserialize, Serialize};

use crate::besov::params::Exponent;
use crate::bspline::{SmoothnessVec, SplineOrder};
use crate::error::{Error, Result};
use crate::estimators::{EstimatorSpec, StudyOptions, DEFAULT_KAPPA, DEFAULT_SIGMA};
use crate::quadrature::QuadratureSpec;
use crate::sampling::PxSampler;
use crate::synth::TargetSpec;

fn two() -> Exponent {
    Exponent::finite(2.0).expect("2 is a valid exponent")
}

fn infinity() -> Exponent {
    Exponent::INFINITY
}

fn one() -> f64 {
    1.0
}

fn default_sigma() -> f64 {
    DEFAULT_SIGMA
}

fn default_seeds() -> u32 {
    5
}

fn default_held_out() -> usize {
    20_000
}

fn default_kappa() -> f64 {
    DEFAULT_KAPPA
}

fn default_delta() -> f64 {
    0.01
}

/// A complete experiment, selected by the `experiment` key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    ApproxRate(ApproxRateConfig),
    EstRate(EstRateConfig),
    Compare(CompareConfig),
    NetSynth(NetSynthConfig),
    Rates(RatesConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproxRateConfig {
    #[serde(default)]
    pub seed: u64,
    pub target: TargetSpec,
    /// Smoothness and order of the approximating basis; taken from the
    /// target series when omitted.
    #[serde(default)]
    pub beta: Option<SmoothnessVec>,
    #[serde(default)]
    pub m: Option<SplineOrder>,
    pub p: Exponent,
    #[serde(default = "infinity")]
    pub q: Exponent,
    #[serde(default = "two")]
    pub r: Exponent,
    #[serde(default)]
    pub relax_order: bool,
    pub k_list: Vec<u32>,
    #[serde(default)]
    pub quadrature: Option<QuadratureSpec>,
}

/// Study settings shared by `est-rate` and `compare`; the seed comes from
/// the experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySettings {
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_seeds")]
    pub seeds: u32,
    #[serde(default)]
    pub sampler: PxSampler,
    pub clip: f64,
    #[serde(default = "default_held_out")]
    pub n_tune: usize,
    #[serde(default = "default_held_out")]
    pub n_test: usize,
}

impl StudySettings {
    pub fn options(&self, seed: u64) -> StudyOptions {
        StudyOptions {
            sigma: self.sigma,
            seeds: self.seeds,
            base_seed: seed,
            sampler: self.sampler.clone(),
            clip: self.clip,
            n_tune: self.n_tune,
            n_test: self.n_test,
        }
    }
}

/// The rate law an estimation study is compared against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TheorySpec {
    /// `−2β̃/(2β̃+1)`.
    Affine { beta: SmoothnessVec },
    /// `−2β₀/(2β₀+d)`.
    Isotropic { beta0: f64, d: usize },
    /// `−2β̃**/(2β̃**+1)`.
    Deep {
        betas: Vec<SmoothnessVec>,
        p: Exponent,
        #[serde(default)]
        eps: f64,
    },
    Explicit { exponent: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstRateConfig {
    #[serde(default)]
    pub seed: u64,
    pub target: TargetSpec,
    pub estimator: EstimatorSpec,
    pub n_list: Vec<usize>,
    pub study: StudySettings,
    /// Derived from the target when omitted.
    #[serde(default)]
    pub theory: Option<TheorySpec>,
}

/// Parameters of the exponent sidebar printed next to a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SidebarSpec {
    pub beta: SmoothnessVec,
    pub p: f64,
    pub d_tilde: usize,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    #[serde(default)]
    pub seed: u64,
    pub target: TargetSpec,
    pub estimators: Vec<EstimatorSpec>,
    pub n_list: Vec<usize>,
    pub study: StudySettings,
    #[serde(default)]
    pub equal_budget: bool,
    #[serde(default)]
    pub sidebar: Option<SidebarSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GadgetSpec {
    pub m: SplineOrder,
    pub d: usize,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesNetSpec {
    /// A `besov-coeffs v1` file, relative to the config file.
    pub coeffs: String,
    pub eps_unit: f64,
    pub p: Exponent,
    #[serde(default = "infinity")]
    pub q: Exponent,
    #[serde(default = "two")]
    pub r: Exponent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetSynthConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub gadget: Option<GadgetSpec>,
    #[serde(default)]
    pub series: Option<SeriesNetSpec>,
    /// Constant inside the depth formula.
    #[serde(default = "one")]
    pub c: f64,
    /// Scale of the covering-number bound.
    #[serde(default = "default_delta")]
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeepRateSpec {
    pub betas: Vec<SmoothnessVec>,
    pub p: Exponent,
    #[serde(default)]
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearRateSpec {
    pub d: usize,
    pub d_tilde: usize,
    pub p: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    #[serde(default)]
    pub seed: u64,
    pub n: f64,
    #[serde(default)]
    pub beta: Option<SmoothnessVec>,
    #[serde(default)]
    pub deep: Option<DeepRateSpec>,
    /// Needs `beta`.
    #[serde(default)]
    pub linear: Option<LinearRateSpec>,
}

/// Line of the first `key = …` entry for the first backquoted name in `msg`.
/// Tagged tables lose source spans, so errors inside them are located here.
fn field_line(text: &str, msg: &str) -> Option<usize> {
    let name = msg.split('`').nth(1)?;
    text.lines().position(|l| {
        l.trim_start()
            .strip_prefix(name)
            .is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

impl ExperimentConfig {
    /// Parses a TOML config. Errors carry the line of the offending entry.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            let line = match e.span() {
                Some(s) => Some(text[..s.start.min(text.len())].lines().count().max(1)),
                None => field_line(text, &msg),
            };
            match line {
                Some(line) => Error::Parse { line, msg },
                None => Error::Config(msg),
            }
        })
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentConfig::ApproxRate(_) => "approx-rate",
            ExperimentConfig::EstRate(_) => "est-rate",
            ExperimentConfig::Compare(_) => "compare",
            ExperimentConfig::NetSynth(_) => "net-synth",
            ExperimentConfig::Rates(_) => "rates",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            ExperimentConfig::ApproxRate(c) => c.seed,
            ExperimentConfig::EstRate(c) => c.seed,
            ExperimentConfig::Compare(c) => c.seed,
            ExperimentConfig::NetSynth(c) => c.seed,
            ExperimentConfig::Rates(c) => c.seed,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            ExperimentConfig::ApproxRate(c) => c.seed = seed,
            ExperimentConfig::EstRate(c) => c.seed = seed,
            ExperimentConfig::Compare(c) => c.seed = seed,
            ExperimentConfig::NetSynth(c) => c.seed = seed,
            ExperimentConfig::Rates(c) => c.seed = seed,
        }
    }
}
