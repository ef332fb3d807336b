//! Numeric modes for measure weights: exact rationals or `f64`.

use std::fmt::Debug;
use std::str::FromStr;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{Num, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArithmeticMode {
    Exact,
    Float64,
}

impl FromStr for ArithmeticMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exact" | "rational" => Ok(ArithmeticMode::Exact),
            "float" | "float64" | "f64" => Ok(ArithmeticMode::Float64),
            other => Err(Error::Parse(format!("unknown arithmetic mode {other:?}"))),
        }
    }
}

/// Scalar type carried by a [`FiniteMeasure`](crate::measure::FiniteMeasure).
pub trait Weight: Num + Clone + Debug + PartialOrd + Send + Sync + 'static {
    const MODE: ArithmeticMode;

    fn from_ratio(num: i64, den: i64) -> Self;

    fn to_f64(&self) -> f64;

    /// `"p/q"` for rationals, shortest round-trip decimal for floats.
    fn render(&self) -> String;

    fn parse_weight(s: &str) -> Result<Self>;

    fn from_int(n: i64) -> Self {
        Self::from_ratio(n, 1)
    }

    fn abs_value(&self) -> Self {
        if *self < Self::zero() {
            Self::zero() - self.clone()
        } else {
            self.clone()
        }
    }

    /// Slack to allow when comparing quantities that should agree exactly.
    fn tolerance() -> Self;
}

impl Weight for f64 {
    const MODE: ArithmeticMode = ArithmeticMode::Float64;

    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn render(&self) -> String {
        format!("{self}")
    }

    fn parse_weight(s: &str) -> Result<Self> {
        let s = s.trim();
        let parsed = match s.split_once('/') {
            Some((p, q)) => p
                .trim()
                .parse::<f64>()
                .and_then(|p| q.trim().parse::<f64>().map(|q| p / q)),
            None => s.parse::<f64>(),
        };
        parsed.map_err(|_| Error::Parse(format!("bad weight {s:?}")))
    }

    fn tolerance() -> Self {
        1e-12
    }
}

impl Weight for BigRational {
    const MODE: ArithmeticMode = ArithmeticMode::Exact;

    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn render(&self) -> String {
        format!("{}/{}", self.numer(), self.denom())
    }

    fn parse_weight(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Parse(format!("bad weight {s:?}"));
        if let Some((p, q)) = s.split_once('/') {
            let p: BigInt = p.trim().parse().map_err(|_| bad())?;
            let q: BigInt = q.trim().parse().map_err(|_| bad())?;
            if q.is_zero() {
                return Err(bad());
            }
            return Ok(BigRational::new(p, q));
        }
        // finite decimal such as "0.25"
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if frac.chars().any(|c| !c.is_ascii_digit()) {
            return Err(bad());
        }
        let digits = format!("{int}{frac}");
        let numer: BigInt = digits.parse().map_err(|_| bad())?;
        let denom = num::pow(BigInt::from(10), frac.len());
        Ok(BigRational::new(numer, denom))
    }

    fn tolerance() -> Self {
        BigRational::zero()
    }
}
