//! `L^p` norms on `R^d` with `p` in `[1, ∞]`.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{invalid, Result};

/// Norm index `p ∈ [1, ∞]`; `f64::INFINITY` encodes the sup norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct NormIndex(f64);

impl NormIndex {
    pub const ONE: NormIndex = NormIndex(1.0);
    pub const TWO: NormIndex = NormIndex(2.0);
    pub const INF: NormIndex = NormIndex(f64::INFINITY);

    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(invalid("p", format!("norm index must lie in [1, inf], got {p}")));
        }
        Ok(NormIndex(p))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_inf(self) -> bool {
        self.0.is_infinite()
    }

    /// `‖v‖_p`.
    pub fn norm(self, v: &[f64]) -> f64 {
        if v.len() == 1 {
            return v[0].abs();
        }
        let p = self.0;
        if p.is_infinite() {
            v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
        } else if p == 1.0 {
            v.iter().map(|x| x.abs()).sum()
        } else if p == 2.0 {
            v.iter().map(|x| x * x).sum::<f64>().sqrt()
        } else {
            v.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p)
        }
    }

    /// `‖a - b‖_p` without allocating.
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        if a.len() == 1 {
            return (a[0] - b[0]).abs();
        }
        let p = self.0;
        let diffs = a.iter().zip(b).map(|(x, y)| (x - y).abs());
        if p.is_infinite() {
            diffs.fold(0.0, f64::max)
        } else if p == 2.0 {
            diffs.map(|t| t * t).sum::<f64>().sqrt()
        } else {
            diffs.map(|t| t.powf(p)).sum::<f64>().powf(1.0 / p)
        }
    }

    /// `d^{1/p}`, the factor between `‖·‖_p` and `‖·‖_∞` on `R^d`.
    pub fn dim_factor(self, d: usize) -> f64 {
        if self.is_inf() {
            1.0
        } else {
            (d as f64).powf(1.0 / self.0)
        }
    }
}

impl TryFrom<f64> for NormIndex {
    type Error = crate::error::BoundError;
    fn try_from(p: f64) -> Result<Self> {
        NormIndex::new(p)
    }
}

impl From<NormIndex> for f64 {
    fn from(p: NormIndex) -> f64 {
        p.0
    }
}

impl fmt::Display for NormIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_inf() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}
