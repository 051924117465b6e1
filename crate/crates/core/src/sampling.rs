//! Design distributions `P_X` on `[0,1]^d`.

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A sampler for the covariate distribution.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PxSampler {
    #[default]
    Uniform,
    /// With probability `weight` draw uniformly from the box `[lo, hi]^d`,
    /// otherwise uniformly from `[0,1]^d`. The density is bounded by
    /// `1 − weight + weight/(hi − lo)^d`.
    Mixture { weight: f64, lo: f64, hi: f64 },
}

impl PxSampler {
    pub fn validate(&self) -> Result<()> {
        if let PxSampler::Mixture { weight, lo, hi } = *self {
            if !(0.0..=1.0).contains(&weight) || !(0.0 <= lo && lo < hi && hi <= 1.0) {
                return Err(Error::config(
                    "mixture sampler needs 0 <= weight <= 1 and 0 <= lo < hi <= 1",
                ));
            }
        }
        Ok(())
    }

    /// Draws one point.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, d: usize) -> Vec<f64> {
        match *self {
            PxSampler::Uniform => (0..d).map(|_| rng.random::<f64>()).collect(),
            PxSampler::Mixture { weight, lo, hi } => {
                let inner = rng.random::<f64>() < weight;
                (0..d)
                    .map(|_| {
                        let u = rng.random::<f64>();
                        if inner {
                            lo + (hi - lo) * u
                        } else {
                            u
                        }
                    })
                    .collect()
            }
        }
    }

    /// Supremum of the density.
    pub fn density_bound(&self, d: usize) -> f64 {
        match *self {
            PxSampler::Uniform => 1.0,
            PxSampler::Mixture { weight, lo, hi } => 1.0 - weight + weight / (hi - lo).powi(d as i32),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn samples_stay_in_cube() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mix = PxSampler::Mixture {
            weight: 0.5,
            lo: 0.25,
            hi: 0.5,
        };
        mix.validate().unwrap();
        for _ in 0..1000 {
            for x in mix.sample(&mut rng, 3) {
                assert!((0.0..1.0).contains(&x));
            }
        }
        assert_eq!(mix.density_bound(2), 0.5 + 0.5 * 16.0);
        assert!(PxSampler::Mixture { weight: 2.0, lo: 0.0, hi: 1.0 }.validate().is_err());
    }
}
