#![allow(dead_code)]

use std::path::PathBuf;

use besov_lab::besov::coeffs::{sequence_norm, SeriesBasis};
use besov_lab::besov::params::Exponent;
use besov_lab::besov::projection::telescoped_coeffs;
use besov_lab::bspline::{SmoothnessVec, SplineOrder};
use besov_lab::synth::{random_series_target, LevelProfile};
use serde::{Deserialize, Serialize};

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn configs_dir() -> PathBuf {
    repo_root().join("configs")
}

pub fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/norm_equivalence.json")
}

/// Parameters and frozen bound of the norm-equivalence regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormGolden {
    pub beta: Vec<f64>,
    pub m: u32,
    pub p: f64,
    pub q: f64,
    pub k_deep: u32,
    pub seeds: Vec<u64>,
    pub observed_min: f64,
    pub observed_max: f64,
    /// Ratios must lie in `[1/c, c]`.
    pub c: f64,
}

impl NormGolden {
    pub fn default_setup() -> Self {
        NormGolden {
            beta: vec![1.0, 2.0],
            m: 3,
            p: 2.0,
            q: 2.0,
            k_deep: 4,
            seeds: (1..=50).collect(),
            observed_min: 0.0,
            observed_max: 0.0,
            c: 0.0,
        }
    }

    /// Recovered-to-original sequence norm ratio for each seed.
    pub fn ratios(&self) -> Vec<f64> {
        let basis = SeriesBasis::new(
            SmoothnessVec::new(self.beta.clone()).unwrap(),
            SplineOrder::new(self.m).unwrap(),
        );
        let p = Exponent::new(self.p).unwrap();
        let q = Exponent::new(self.q).unwrap();
        self.seeds
            .iter()
            .map(|&seed| {
                let f = random_series_target(
                    &basis,
                    p,
                    q,
                    self.k_deep,
                    LevelProfile::Balanced,
                    0.0,
                    seed,
                )
                .unwrap();
                let eval = f.evaluator().unwrap();
                let recovered = telescoped_coeffs(&eval, self.k_deep, &basis).unwrap();
                sequence_norm(&recovered, p, q) / sequence_norm(&f, p, q)
            })
            .collect()
    }
}
