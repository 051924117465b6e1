use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::besov::coeffs::SeriesBasis;
use crate::bspline::{SmoothnessVec, SplineOrder};
use crate::error::{Error, Result};

/// An integrability or summability index in `(0, ∞]`.
///
/// In configuration files it is written either as a number or as the
/// string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Exponent(f64);

impl Exponent {
    pub const INFINITY: Exponent = Exponent(f64::INFINITY);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() || value <= 0.0 {
            return Err(Error::config(format!(
                "exponent must lie in (0, inf], got {value}"
            )));
        }
        Ok(Self(value))
    }

    pub fn finite(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::config("expected a finite exponent"));
        }
        Self::new(value)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    /// `1/p` with the convention `1/∞ = 0`.
    pub fn recip(self) -> f64 {
        if self.0.is_infinite() {
            0.0
        } else {
            1.0 / self.0
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "Inf" | "∞" => Ok(Self::INFINITY),
            other => other
                .parse::<f64>()
                .map_err(|_| Error::config(format!("cannot parse exponent {other:?}")))
                .and_then(Self::new),
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Int(i64),
            Str(String),
        }
        let parsed = match Raw::deserialize(d)? {
            Raw::Num(v) => Exponent::new(v),
            Raw::Int(v) => Exponent::new(v as f64),
            Raw::Str(s) => s.parse(),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

/// Serde helpers for reals in `[0, ∞]`, writing `∞` as `"inf"`.
pub mod extended_real {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {s:?}"))),
        }
    }
}

/// `(x)_+ = max(x, 0)`.
pub fn positive_part(x: f64) -> f64 {
    x.max(0.0)
}

/// Parameters of an anisotropic Besov ball `U(B^β_{p,q})` together with the
/// error norm `L^r` and the spline order used to represent it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BesovParams {
    pub p: Exponent,
    pub q: Exponent,
    pub r: Exponent,
    pub beta: SmoothnessVec,
    pub m: SplineOrder,
    /// Set when the order condition `β̄ < min(m, m − 1 + 1/p)` was waived.
    #[serde(default)]
    pub order_relaxed: bool,
}

impl BesovParams {
    /// Validated constructor: requires `β̃ > (1/p − 1/r)_+` and
    /// `0 < β̄ < min(m, m − 1 + 1/p)`.
    pub fn new(
        p: Exponent,
        q: Exponent,
        r: Exponent,
        beta: SmoothnessVec,
        m: SplineOrder,
    ) -> Result<Self> {
        let params = Self {
            p,
            q,
            r,
            beta,
            m,
            order_relaxed: false,
        };
        params.check_integrability()?;
        params.check_order()?;
        Ok(params)
    }

    /// Like [`BesovParams::new`] but without the spline-order condition.
    ///
    /// Finite spline series of low order are still legitimate targets and
    /// approximants; only the norm equivalence with the function-space norm
    /// needs the order condition. The returned value is flagged.
    pub fn with_relaxed_order(
        p: Exponent,
        q: Exponent,
        r: Exponent,
        beta: SmoothnessVec,
        m: SplineOrder,
    ) -> Result<Self> {
        let mut params = Self {
            p,
            q,
            r,
            beta,
            m,
            order_relaxed: false,
        };
        params.check_integrability()?;
        params.order_relaxed = params.check_order().is_err();
        Ok(params)
    }

    fn check_integrability(&self) -> Result<()> {
        let delta = self.delta();
        if self.beta.beta_tilde() <= delta {
            return Err(Error::config(format!(
                "inadmissible parameters: beta_tilde = {} must exceed (1/p - 1/r)_+ = {}",
                self.beta.beta_tilde(),
                delta
            )));
        }
        Ok(())
    }

    fn check_order(&self) -> Result<()> {
        let m = self.m.get() as f64;
        let bound = m.min(m - 1.0 + self.p.recip());
        if !(self.beta.beta_max() < bound) {
            return Err(Error::config(format!(
                "spline order m = {} too low: need max beta = {} < min(m, m - 1 + 1/p) = {}",
                self.m.get(),
                self.beta.beta_max(),
                bound
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.beta.dim()
    }

    pub fn basis(&self) -> SeriesBasis {
        SeriesBasis::new(self.beta.clone(), self.m)
    }

    /// `δ = (1/p − 1/r)_+`.
    pub fn delta(&self) -> f64 {
        positive_part(self.p.recip() - self.r.recip())
    }

    /// `ν = (β̃ − δ)/(2δ)`, infinite when `δ = 0`.
    pub fn nu(&self) -> f64 {
        let delta = self.delta();
        if delta == 0.0 {
            f64::INFINITY
        } else {
            (self.beta.beta_tilde() - delta) / (2.0 * delta)
        }
    }
}
