//! Verdicts on whether an envelope dominates an estimated or exact tail.

use serde::Serialize;

use super::tail::TailEstimate;
use crate::envelopes::TailBound;
use crate::error::{BoundError, Result};
use crate::norms::NormIndex;

/// Slack for exact comparisons.
const EXACT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub u: f64,
    pub p_lcb: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominationReport {
    pub label: String,
    pub exact: bool,
    pub bounds: Vec<f64>,
    pub violations: Vec<Violation>,
    /// `min_u (bound(u) − p_lcb(u))`.
    pub min_margin: f64,
    /// Median of `bound(u) − p_lcb(u)`.
    pub median_margin: f64,
}

impl DominationReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn verdict(&self) -> &'static str {
        if self.pass() {
            "PASS"
        } else {
            "FAIL"
        }
    }
}

/// A violation is `p_lcb(u) > env(u)` for Monte-Carlo tails and
/// `p(u) > env(u) + 1e-12` for exact tails.
pub fn check_domination(tail: &TailEstimate, env: &dyn TailBound) -> Result<DominationReport> {
    if let Some((n, d, p)) = env.meta() {
        if n != tail.n || d != tail.out_dim || p != tail.norm_index() {
            return Err(BoundError::MetadataMismatch(format!(
                "envelope {} built for (n = {n}, d = {d}, p = {p}), tail is (n = {}, d = {}, p = {})",
                env.label(),
                tail.n,
                tail.out_dim,
                tail.p
            )));
        }
    }
    let tol = if tail.exact { EXACT_TOL } else { 0.0 };
    let mut violations = Vec::new();
    let mut bounds = Vec::with_capacity(tail.u_grid.len());
    let mut margins = Vec::with_capacity(tail.u_grid.len());
    for (i, &u) in tail.u_grid.iter().enumerate() {
        let b = env.tail_bound(u);
        let lcb = tail.p_lcb[i];
        if lcb > b + tol {
            violations.push(Violation { u, p_lcb: lcb, bound: b });
        }
        bounds.push(b);
        margins.push(b - lcb);
    }
    let min_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
    margins.sort_by(f64::total_cmp);
    let median_margin = margins.get(margins.len() / 2).copied().unwrap_or(f64::NAN);
    Ok(DominationReport {
        label: env.label(),
        exact: tail.exact,
        bounds,
        violations,
        min_margin,
        median_margin,
    })
}

/// Step-function envelope from tabulated values: `env(u)` is the value at
/// the largest grid point `≤ u` (1 below the grid).
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedEnvelope {
    pub label: String,
    pub u: Vec<f64>,
    pub values: Vec<f64>,
    pub meta: Option<(usize, usize, NormIndex)>,
}

impl TabulatedEnvelope {
    /// `scale × p_hat`, the adversarial fake for negative controls.
    pub fn scaled(tail: &TailEstimate, scale: f64) -> Self {
        TabulatedEnvelope {
            label: format!("fake_{scale}x_tail"),
            u: tail.u_grid.clone(),
            values: tail.p_hat.iter().map(|p| scale * p).collect(),
            meta: Some((tail.n, tail.out_dim, tail.norm_index())),
        }
    }

    /// `env ≡ c`.
    pub fn constant(c: f64) -> Self {
        TabulatedEnvelope {
            label: format!("constant_{c}"),
            u: vec![0.0],
            values: vec![c],
            meta: None,
        }
    }
}

impl TailBound for TabulatedEnvelope {
    fn tail_bound(&self, u: f64) -> f64 {
        let i = self.u.partition_point(|v| *v <= u);
        if i == 0 {
            1.0
        } else {
            self.values[i - 1]
        }
    }

    fn label(&self) -> String {
        self.label.clone()
    }

    fn meta(&self) -> Option<(usize, usize, NormIndex)> {
        self.meta
    }
}
