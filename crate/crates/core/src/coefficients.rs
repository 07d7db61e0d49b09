//! `K_{k,n}` and the constants consumed by every envelope and moment bound.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::envelopes::InitialTailSpec;
use crate::error::{invalid, BoundError, Result};
use crate::schedules::{Regime, Schedule};

/// `K_{k,n}` for `k = 1..=n` together with the schedule values at `k = 2..=n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTable {
    pub n: usize,
    /// `k_values[k - 1] = K_{k,n}`.
    pub k_values: Vec<f64>,
    /// `rho[k - 2] = ρ_k`, likewise for `tau` and `xi`.
    pub rho: Vec<f64>,
    pub tau: Vec<f64>,
    pub xi: Vec<f64>,
}

impl CoefficientTable {
    /// `K_{k,n}` for `1 ≤ k ≤ n`.
    pub fn k(&self, k: usize) -> f64 {
        self.k_values[k - 1]
    }

    pub fn k1n(&self) -> f64 {
        self.k_values[0]
    }

    /// `(K_{k,n}, τ_k, ξ_k)` for `k = 2..=n`.
    pub fn terms(&self) -> impl Iterator<Item = (usize, f64, f64, f64)> + '_ {
        (2..=self.n).map(move |k| (k, self.k_values[k - 1], self.tau[k - 2], self.xi[k - 2]))
    }

    /// Rows `(k, K_kn, tau_k, xi_k, rho_k)`; the schedule columns are `None`
    /// at `k = 1`.
    pub fn rows(&self) -> Vec<(usize, f64, Option<f64>, Option<f64>, Option<f64>)> {
        (1..=self.n)
            .map(|k| {
                if k == 1 {
                    (1, self.k_values[0], None, None, None)
                } else {
                    (
                        k,
                        self.k_values[k - 1],
                        Some(self.tau[k - 2]),
                        Some(self.xi[k - 2]),
                        Some(self.rho[k - 2]),
                    )
                }
            })
            .collect()
    }
}

/// `K_{n,n} = 1`, `K_{k,n} = 1 + ρ_{k+1} K_{k+1,n}`.
#[allow(non_snake_case)]
pub fn compute_K(s: &Schedule, n: usize) -> Result<CoefficientTable> {
    if n < 2 {
        return Err(BoundError::HorizonTooSmall(n));
    }
    let mut rho = Vec::with_capacity(n - 1);
    let mut tau = Vec::with_capacity(n - 1);
    let mut xi = Vec::with_capacity(n - 1);
    for m in 2..=n {
        let (r, t, x) = s.eval(m)?;
        rho.push(r);
        tau.push(t);
        xi.push(x);
    }
    let mut k_values = vec![1.0; n];
    for k in (1..n).rev() {
        k_values[k - 1] = 1.0 + rho[k - 1] * k_values[k];
    }
    Ok(CoefficientTable {
        n,
        k_values,
        rho,
        tau,
        xi,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundKind {
    Bernstein,
    SemiExp,
    FukNagaev,
    VBE,
    WeakMoment,
    McDiarmid,
    Hoeffding,
    MZ,
    VBEMoment,
}

impl BoundKind {
    pub const TAIL_KINDS: [BoundKind; 7] = [
        BoundKind::Bernstein,
        BoundKind::SemiExp,
        BoundKind::FukNagaev,
        BoundKind::VBE,
        BoundKind::WeakMoment,
        BoundKind::McDiarmid,
        BoundKind::Hoeffding,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            BoundKind::Bernstein => "bernstein",
            BoundKind::SemiExp => "semiexp",
            BoundKind::FukNagaev => "fuk_nagaev",
            BoundKind::VBE => "vbe",
            BoundKind::WeakMoment => "weak",
            BoundKind::McDiarmid => "mcdiarmid",
            BoundKind::Hoeffding => "hoeffding",
            BoundKind::MZ => "mz",
            BoundKind::VBEMoment => "vbe_moment",
        }
    }

    pub fn from_tag(tag: &str) -> Option<BoundKind> {
        [
            BoundKind::Bernstein,
            BoundKind::SemiExp,
            BoundKind::FukNagaev,
            BoundKind::VBE,
            BoundKind::WeakMoment,
            BoundKind::McDiarmid,
            BoundKind::Hoeffding,
            BoundKind::MZ,
            BoundKind::VBEMoment,
        ]
        .into_iter()
        .find(|k| k.tag() == tag)
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Constants of one proposition. Fields not used by `kind` stay zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub kind: BoundKind,
    pub v2: f64,
    pub delta: f64,
    pub d: f64,
    pub hq: f64,
    pub vq: f64,
    pub bq: f64,
    pub tq: f64,
    pub q: f64,
}

impl BoundConstants {
    fn empty(kind: BoundKind, q: f64) -> Self {
        BoundConstants {
            kind,
            v2: 0.0,
            delta: 0.0,
            d: 0.0,
            hq: 0.0,
            vq: 0.0,
            bq: 0.0,
            tq: 0.0,
            q,
        }
    }
}

/// Moment hypotheses on the dominating variables `G_ε(ε)` and `G_{X₁}(X₁)`.
///
/// Names follow the role of each constant rather than its symbol, because
/// the same symbol is reused with different meanings across propositions
/// (`B₁(q)` is a noise moment for Fuk–Nagaev but an initial-state moment for
/// the Marcinkiewicz–Zygmund bound).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MomentConstants {
    /// Bernstein `H₁`: `E[G^k] ≤ (k!/2) H₁^{k−2} A₁` for all `k ≥ 2`.
    pub bern_h: Option<f64>,
    /// Bernstein `A₁`.
    pub bern_a: Option<f64>,
    /// Semi-exponential `A₁ ≥ E[G² exp(G^q)]`.
    pub semi_a: Option<f64>,
    /// `E[exp(G^q)]` for the semi-exponential bound.
    pub semi_eexp: Option<f64>,
    /// `E[G_ε(ε)²]` (Fuk–Nagaev and Hoeffding `A₁`).
    pub second_moment: Option<f64>,
    /// `E[G_ε(ε)^q]` at order [`q`](Self::q).
    pub noise_q_moment: Option<f64>,
    /// `E[G_{X₁}(X₁)^q]` at order [`q`](Self::q).
    pub init_q_moment: Option<f64>,
    /// `T₁ ≥ ess sup δ(ε, ε′)`.
    pub t1: Option<f64>,
    /// `T ≥ ess sup G_ε(ε)` (bounded Hoeffding case).
    pub g_sup: Option<f64>,
    pub q: Option<f64>,
    pub init_tail: InitialTailSpec,
    /// Set when some constant came from an inflated Monte-Carlo estimate.
    pub estimated: bool,
}

fn need(v: Option<f64>, name: &'static str) -> Result<f64> {
    match v {
        Some(x) if x > 0.0 && x.is_finite() => Ok(x),
        Some(x) => Err(invalid(name, format!("must be positive and finite, got {x}"))),
        None => Err(BoundError::MissingConstant(name)),
    }
}

fn need_q_moment(v: Option<f64>, name: &'static str, mc: &MomentConstants, q: f64) -> Result<f64> {
    match mc.q {
        Some(mq) if (mq - q).abs() <= 1e-12 => need(v, name),
        Some(mq) => Err(invalid(
            name,
            format!("moment given at order {mq}, requested order {q}"),
        )),
        None => Err(BoundError::MissingConstant("q")),
    }
}

fn check_q(q: f64, ok: bool, range: &'static str) -> Result<()> {
    if ok && q.is_finite() {
        Ok(())
    } else {
        Err(BoundError::OrderOutOfRange { q, range })
    }
}

pub fn constants_bernstein(t: &CoefficientTable, mc: &MomentConstants) -> Result<BoundConstants> {
    let h1 = need(mc.bern_h, "bern_h")?;
    let a1 = need(mc.bern_a, "bern_a")?;
    let mut c = BoundConstants::empty(BoundKind::Bernstein, 0.0);
    let mut s = 0.0;
    for (_, kk, tau, xi) in t.terms() {
        s += (2.0 * kk * (tau + xi)).powi(2);
        c.delta = c.delta.max(2.0 * kk * (tau * h1 + xi));
    }
    c.v2 = (1.0 + a1) * s;
    Ok(c)
}

pub fn constants_semiexp(t: &CoefficientTable, mc: &MomentConstants, q: f64) -> Result<BoundConstants> {
    check_q(q, q > 0.0 && q < 1.0, "(0, 1)")?;
    let a1 = need(mc.semi_a, "semi_a")?;
    let eexp = need(mc.semi_eexp, "semi_eexp")?;
    let mut c = BoundConstants::empty(BoundKind::SemiExp, q);
    let mut s = 0.0;
    for (_, kk, tau, xi) in t.terms() {
        s += kk * kk * (tau * tau * a1 + xi * xi * eexp);
        c.delta = c.delta.max(kk * tau).max(kk * xi);
    }
    c.v2 = 2.0 * std::f64::consts::E * s;
    Ok(c)
}

pub fn constants_fuk_nagaev(t: &CoefficientTable, mc: &MomentConstants, q: f64) -> Result<BoundConstants> {
    check_q(q, q >= 2.0, "[2, inf)")?;
    let a1 = need(mc.second_moment, "second_moment")?;
    let b1 = need_q_moment(mc.noise_q_moment, "noise_q_moment", mc, q)?;
    let mut c = BoundConstants::empty(BoundKind::FukNagaev, q);
    let (mut v, mut h) = (0.0, 0.0);
    for (_, kk, tau, xi) in t.terms() {
        v += kk * kk * (tau * tau * a1 + xi * xi);
        h += kk.powf(q) * (tau.powf(q) * b1 + xi.powf(q));
    }
    c.v2 = 2.0 * v;
    c.hq = 2f64.powf(q - 1.0) * h;
    Ok(c)
}

pub fn constants_vbe(t: &CoefficientTable, mc: &MomentConstants, q: f64) -> Result<BoundConstants> {
    check_q(q, (1.0..=2.0).contains(&q), "[1, 2]")?;
    let a = need_q_moment(mc.noise_q_moment, "noise_q_moment", mc, q)?;
    let mut c = BoundConstants::empty(BoundKind::VBE, q);
    let mut head = 0.0;
    let mut tail = 0.0;
    for (k, kk, tau, xi) in t.terms() {
        let term = kk.powf(q) * (tau.powf(q) * a + xi.powf(q));
        if k == 2 {
            head = term;
        } else {
            tail += term;
        }
    }
    c.vq = 2f64.powf(q - 1.0) * (head + 2f64.powf(2.0 - q) * tail);
    Ok(c)
}

pub fn constants_weak(t: &CoefficientTable, mc: &MomentConstants, q: f64) -> Result<BoundConstants> {
    check_q(q, q > 1.0 && q < 2.0, "(1, 2)")?;
    let a = need_q_moment(mc.noise_q_moment, "noise_q_moment", mc, q)?;
    let mut c = BoundConstants::empty(BoundKind::WeakMoment, q);
    c.bq = t
        .terms()
        .map(|(_, kk, tau, xi)| (2.0 * kk).powf(q) * (tau.powf(q) * a + xi.powf(q)))
        .sum();
    Ok(c)
}

/// `C_{d,q} = 2^{2+q} d (q/(q−1) + 2/(2−q))`.
pub fn weak_constant(d: usize, q: f64) -> Result<f64> {
    check_q(q, q > 1.0 && q < 2.0, "(1, 2)")?;
    Ok(2f64.powf(2.0 + q) * d as f64 * (q / (q - 1.0) + 2.0 / (2.0 - q)))
}

pub fn constants_mcdiarmid(t: &CoefficientTable, mc: &MomentConstants) -> Result<BoundConstants> {
    let t1 = need(mc.t1, "t1")?;
    let mut c = BoundConstants::empty(BoundKind::McDiarmid, 0.0);
    for (_, kk, tau, xi) in t.terms() {
        let r = kk * (tau * t1 + xi);
        c.d += r;
        c.v2 += r * r;
    }
    Ok(c)
}

pub fn constants_hoeffding(t: &CoefficientTable, mc: &MomentConstants) -> Result<BoundConstants> {
    let a1 = need(mc.second_moment, "second_moment")?;
    let mut c = BoundConstants::empty(BoundKind::Hoeffding, 0.0);
    let mut s = 0.0;
    for (_, kk, tau, xi) in t.terms() {
        s += kk * kk * (tau * tau * a1 + xi * xi);
        c.delta = c.delta.max(kk * tau).max(kk * xi);
    }
    c.v2 = 2.0 * s;
    Ok(c)
}

/// Marcinkiewicz–Zygmund `T_n(q)`. A deterministic initial state contributes
/// `E[G_{X₁}^q] = 0`, which is accepted here.
pub fn constants_mz(t: &CoefficientTable, mc: &MomentConstants, q: f64) -> Result<BoundConstants> {
    check_q(q, q >= 2.0, "[2, inf)")?;
    let b1 = init_moment(mc, q)?;
    let b2 = need_q_moment(mc.noise_q_moment, "noise_q_moment", mc, q)?;
    let mut c = BoundConstants::empty(BoundKind::MZ, q);
    let s: f64 = t
        .terms()
        .map(|(_, kk, tau, xi)| kk * kk * (tau.powf(q) * b2 + xi.powf(q)).powf(2.0 / q))
        .sum();
    c.tq = t.k1n().powi(2) * b1.powf(2.0 / q) + (q - 1.0) * 2f64.powf(2.0 - 2.0 / q) * s;
    Ok(c)
}

/// von Bahr–Esseen moment `V_n(q)`.
pub fn constants_vbe_moment(t: &CoefficientTable, mc: &MomentConstants, q: f64) -> Result<BoundConstants> {
    check_q(q, (1.0..=2.0).contains(&q), "[1, 2]")?;
    let a1 = init_moment(mc, q)?;
    let a2 = need_q_moment(mc.noise_q_moment, "noise_q_moment", mc, q)?;
    let mut c = BoundConstants::empty(BoundKind::VBEMoment, q);
    let s: f64 = t
        .terms()
        .map(|(_, kk, tau, xi)| kk.powf(q) * (tau.powf(q) * a2 + xi.powf(q)))
        .sum();
    c.vq = t.k1n().powf(q) * a1 + 2.0 * s;
    Ok(c)
}

fn init_moment(mc: &MomentConstants, q: f64) -> Result<f64> {
    match (mc.init_q_moment, mc.init_tail) {
        (None, InitialTailSpec::Deterministic) | (Some(0.0), _) => Ok(0.0),
        (v, _) => need_q_moment(v, "init_q_moment", mc, q),
    }
}

/// Asymptotics row for one horizon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticsRow {
    pub n: usize,
    /// `max_k K_{k,n}(τ_k + ξ_k)`.
    pub max_k_noise: f64,
    /// `max_k K_{k,n} τ_k / k^α`.
    pub max_k_tau_over: f64,
    /// `max_k K_{k,n} τ_k k^α`.
    pub max_k_tau_times: f64,
    pub k1n: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticsReport {
    pub regime: Regime,
    pub alpha: f64,
    pub rho: f64,
    pub rows: Vec<AsymptoticsRow>,
    /// `(k, l)` pairs checked against the log-product estimate.
    pub log_product_checked: usize,
    /// Pairs where `ln(ρ_{k+1}⋯ρ_{k+l}) > −ρ(l−1)/(k+l)^α`.
    pub log_product_violations: Vec<(usize, usize)>,
    /// Pairs where the stronger form with the extra `(1−α)^{−2}` factor fails.
    pub log_product_strong_violations: Vec<(usize, usize)>,
}

impl AsymptoticsReport {
    /// Relative spread `max/min − 1` of a column over the horizons.
    pub fn spread(&self, col: impl Fn(&AsymptoticsRow) -> f64) -> f64 {
        let vals: Vec<f64> = self.rows.iter().map(col).collect();
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        hi / lo - 1.0
    }

    /// Ratios of successive entries of a column.
    pub fn ratios(&self, col: impl Fn(&AsymptoticsRow) -> f64) -> Vec<f64> {
        self.rows.windows(2).map(|w| col(&w[1]) / col(&w[0])).collect()
    }
}

/// Upper bound on `ln(ρ_{k+1}⋯ρ_{k+l})` under `ρ_i ≤ 1 − ρ/i^α`; `strong`
/// divides by `(1−α)²` as well.
pub fn log_product_bound(rho: f64, alpha: f64, k: usize, l: usize, strong: bool) -> f64 {
    let base = -rho * (l as f64 - 1.0) / ((k + l) as f64).powf(alpha);
    if strong {
        base / (1.0 - alpha).powi(2)
    } else {
        base
    }
}

pub fn asymptotics_report(s: &Schedule, n_grid: &[usize]) -> Result<AsymptoticsReport> {
    let p = s
        .params()
        .ok_or_else(|| invalid("schedule", "custom schedules must be classified first"))?;
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("n_grid", "must be nonempty and strictly increasing"));
    }
    let mut rows = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let t = compute_K(s, n)?;
        let mut row = AsymptoticsRow {
            n,
            max_k_noise: 0.0,
            max_k_tau_over: 0.0,
            max_k_tau_times: 0.0,
            k1n: t.k1n(),
        };
        for (k, kk, tau, xi) in t.terms() {
            let ka = (k as f64).powf(p.alpha);
            row.max_k_noise = row.max_k_noise.max(kk * (tau + xi));
            row.max_k_tau_over = row.max_k_tau_over.max(kk * tau / ka);
            row.max_k_tau_times = row.max_k_tau_times.max(kk * tau * ka);
        }
        rows.push(row);
    }

    let mut checked = 0;
    let mut viol = Vec::new();
    let mut strong_viol = Vec::new();
    if p.regime != Regime::C17 {
        let n_max = *n_grid.last().unwrap();
        let ks = [1usize, 2, 3, 5, 10, 30, 100, 300, 1000];
        let ls = [1usize, 2, 3, 5, 10, 30, 100, 300, 1000];
        for &k in &ks {
            for &l in &ls {
                if k + l > n_max {
                    continue;
                }
                let mut lp = 0.0;
                for i in k + 1..=k + l {
                    lp += s.eval(i)?.0.ln();
                }
                checked += 1;
                let tol = 1e-12 * lp.abs().max(1.0);
                if lp > log_product_bound(p.rho, p.alpha, k, l, false) + tol {
                    viol.push((k, l));
                }
                if lp > log_product_bound(p.rho, p.alpha, k, l, true) + tol {
                    strong_viol.push((k, l));
                }
            }
        }
    }
    Ok(AsymptoticsReport {
        regime: p.regime,
        alpha: p.alpha,
        rho: p.rho,
        rows,
        log_product_checked: checked,
        log_product_violations: viol,
        log_product_strong_violations: strong_viol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedules::{make_schedule, CustomSequences};

    fn custom(rho: Vec<f64>, tau: Vec<f64>, xi: Vec<f64>) -> Schedule {
        Schedule::custom(CustomSequences { rho, tau, xi }).unwrap()
    }

    fn table_n2(tau: f64, xi: f64) -> CoefficientTable {
        compute_K(&custom(vec![0.0], vec![tau], vec![xi]), 2).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    fn mc_q(q: f64, moment: f64) -> MomentConstants {
        MomentConstants {
            q: Some(q),
            noise_q_moment: Some(moment),
            second_moment: Some(1.0),
            ..Default::default()
        }
    }

    #[test]
    fn k_examples() {
        let zero = custom(vec![0.0; 5], vec![1.0; 5], vec![0.0; 5]);
        assert!(compute_K(&zero, 6).unwrap().k_values.iter().all(|&k| k == 1.0));
        let half = custom(vec![0.5, 0.5], vec![1.0; 2], vec![0.0; 2]);
        assert_eq!(compute_K(&half, 3).unwrap().k_values, vec![1.75, 1.5, 1.0]);
        let s = make_schedule(Regime::C16, 0.3, 0.4, 1.0, None).unwrap();
        assert_eq!(*compute_K(&s, 77).unwrap().k_values.last().unwrap(), 1.0);
        assert_eq!(compute_K(&s, 1), Err(BoundError::HorizonTooSmall(1)));
    }

    #[test]
    fn geometric_closed_form() {
        // ρ ≡ r gives K_{k,n} = (1 − r^{n−k+1})/(1 − r).
        let s = make_schedule(Regime::C15, 0.0, 0.3, 1.0, None).unwrap();
        let t = compute_K(&s, 40).unwrap();
        let r: f64 = 0.7;
        for k in 1..=40 {
            let expect = (1.0 - r.powi((40 - k + 1) as i32)) / (1.0 - r);
            assert!(close(t.k(k), expect, 1e-13));
        }
    }

    #[test]
    fn bernstein_examples() {
        let mc = MomentConstants {
            bern_h: Some(1.0),
            bern_a: Some(1.0),
            ..Default::default()
        };
        let c = constants_bernstein(&table_n2(1.0, 0.0), &mc).unwrap();
        assert_eq!((c.v2, c.delta), (8.0, 2.0));
        let c = constants_bernstein(&table_n2(0.0, 0.0), &mc).unwrap();
        assert_eq!((c.v2, c.delta), (0.0, 0.0));
        let missing = MomentConstants::default();
        assert_eq!(
            constants_bernstein(&table_n2(1.0, 0.0), &missing),
            Err(BoundError::MissingConstant("bern_h"))
        );
    }

    #[test]
    fn bernstein_v2_linear_growth_under_c15_alpha_zero() {
        let mc = MomentConstants {
            bern_h: Some(1.0),
            bern_a: Some(1.0),
            ..Default::default()
        };
        let s = make_schedule(Regime::C15, 0.0, 0.5, 1.0, None).unwrap();
        let per_n: Vec<f64> = [100, 1000, 10_000]
            .iter()
            .map(|&n| constants_bernstein(&compute_K(&s, n).unwrap(), &mc).unwrap().v2 / n as f64)
            .collect();
        // τ = ξ = 1 and K → 2, so V²/n → (1 + A₁)(2·2·2)² = 128.
        for v in per_n {
            assert!(v <= 128.0 && v > 120.0, "{v}");
        }
    }

    #[test]
    fn semiexp_examples() {
        let mc = MomentConstants {
            semi_a: Some(1.0),
            semi_eexp: Some(std::f64::consts::E),
            ..Default::default()
        };
        let e = std::f64::consts::E;
        let c = constants_semiexp(&table_n2(1.0, 0.0), &mc, 0.5).unwrap();
        assert!(close(c.v2, 2.0 * e, 1e-15));
        assert_eq!(constants_semiexp(&table_n2(0.0, 0.0), &mc, 0.5).unwrap().v2, 0.0);
        let c = constants_semiexp(&table_n2(0.0, 1.0), &mc, 0.5).unwrap();
        assert!(close(c.v2, 2.0 * e * e, 1e-15));
        assert!(matches!(
            constants_semiexp(&table_n2(1.0, 0.0), &mc, 1.0),
            Err(BoundError::OrderOutOfRange { .. })
        ));
    }

    #[test]
    fn fuk_nagaev_examples() {
        let s = make_schedule(Regime::C16, 0.4, 0.3, 1.5, None).unwrap();
        let t = compute_K(&s, 30).unwrap();
        let mut mc = mc_q(2.0, 1.7);
        mc.second_moment = Some(1.7);
        let c = constants_fuk_nagaev(&t, &mc, 2.0).unwrap();
        assert!(close(c.hq, c.v2, 1e-14));

        let c = constants_fuk_nagaev(&table_n2(1.0, 0.0), &mc_q(3.0, 2.0), 3.0).unwrap();
        assert!(close(c.hq, 8.0, 1e-15));
        let c = constants_fuk_nagaev(&table_n2(0.0, 0.0), &mc_q(3.0, 2.0), 3.0).unwrap();
        assert_eq!((c.hq, c.v2), (0.0, 0.0));
        assert!(constants_fuk_nagaev(&table_n2(1.0, 0.0), &mc_q(1.5, 2.0), 1.5).is_err());
        // Moment order must match the requested order.
        assert!(constants_fuk_nagaev(&table_n2(1.0, 0.0), &mc_q(3.0, 2.0), 4.0).is_err());
    }

    #[test]
    fn vbe_examples() {
        let c = constants_vbe(&table_n2(1.0, 0.0), &mc_q(2.0, 1.0), 2.0).unwrap();
        assert!(close(c.vq, 2.0, 1e-15));
        assert_eq!(constants_vbe(&table_n2(0.0, 0.0), &mc_q(2.0, 1.0), 2.0).unwrap().vq, 0.0);
        assert!(constants_vbe(&table_n2(1.0, 0.0), &mc_q(2.5, 1.0), 2.5).is_err());

        // q = 1 collapses to K₂(τ₂A + ξ₂) + 2Σ_{k≥3} K(τA + ξ).
        let s = custom(vec![0.3, 0.6, 0.2], vec![1.0, 0.5, 0.25], vec![0.1, 0.2, 0.3]);
        let t = compute_K(&s, 4).unwrap();
        let a = 1.3;
        let c = constants_vbe(&t, &mc_q(1.0, a), 1.0).unwrap();
        let mut expect = t.k(2) * (1.0 * a + 0.1);
        expect += 2.0 * (t.k(3) * (0.5 * a + 0.2) + t.k(4) * (0.25 * a + 0.3));
        assert!(close(c.vq, expect, 1e-14));
    }

    #[test]
    fn weak_examples() {
        let c = constants_weak(&table_n2(1.0, 0.0), &mc_q(1.5, 1.0), 1.5).unwrap();
        assert!(close(c.bq, 2f64.powf(1.5), 1e-15));
        assert_eq!(constants_weak(&table_n2(0.0, 0.0), &mc_q(1.5, 1.0), 1.5).unwrap().bq, 0.0);
        assert!(close(weak_constant(1, 1.5).unwrap(), 79.19595949289332, 1e-12));
        assert!(weak_constant(1, 1.0).is_err());
        assert!(weak_constant(1, 2.0).is_err());
        assert!(constants_weak(&table_n2(1.0, 0.0), &mc_q(2.0, 1.0), 2.0).is_err());
    }

    #[test]
    fn mcdiarmid_examples() {
        let mc = MomentConstants {
            t1: Some(2.0),
            ..Default::default()
        };
        let c = constants_mcdiarmid(&table_n2(1.0, 0.0), &mc).unwrap();
        assert_eq!((c.d, c.v2), (2.0, 4.0));
        let c = constants_mcdiarmid(&table_n2(0.0, 0.0), &mc).unwrap();
        assert_eq!((c.d, c.v2), (0.0, 0.0));
        let t = compute_K(&custom(vec![0.0, 0.5], vec![1.0, 1.0], vec![0.0, 0.0]), 3).unwrap();
        let mc = MomentConstants {
            t1: Some(1.0),
            ..Default::default()
        };
        let c = constants_mcdiarmid(&t, &mc).unwrap();
        assert!(close(c.d, 2.5, 1e-15) && close(c.v2, 3.25, 1e-15));
    }

    #[test]
    fn hoeffding_examples() {
        let mc = MomentConstants {
            second_moment: Some(1.0),
            ..Default::default()
        };
        let c = constants_hoeffding(&table_n2(1.0, 0.0), &mc).unwrap();
        assert_eq!((c.v2, c.delta), (2.0, 1.0));
        let c = constants_hoeffding(&table_n2(0.0, 0.0), &mc).unwrap();
        assert_eq!((c.v2, c.delta), (0.0, 0.0));
        let c = constants_hoeffding(&table_n2(0.0, 3.0), &mc).unwrap();
        assert_eq!(c.delta, 3.0);
    }

    fn t_k15() -> CoefficientTable {
        compute_K(&custom(vec![0.5], vec![1.0], vec![0.0]), 2).unwrap()
    }

    #[test]
    fn mz_examples() {
        let mut mc = mc_q(2.0, 1.0);
        mc.init_q_moment = Some(1.0);
        mc.init_tail = InitialTailSpec::ExpTail { c: 1.0 };
        let c = constants_mz(&t_k15(), &mc, 2.0).unwrap();
        assert!(close(c.tq, 4.25, 1e-15));

        let zero = compute_K(&custom(vec![0.5], vec![0.0], vec![0.0]), 2).unwrap();
        assert!(close(constants_mz(&zero, &mc, 2.0).unwrap().tq, 2.25, 1e-15));

        // q = 2: T = K₁²B₁ + 2ΣK²(τ²B₂ + ξ²).
        let s = custom(vec![0.3, 0.6], vec![1.0, 0.5], vec![0.1, 0.2]);
        let t = compute_K(&s, 3).unwrap();
        let mut mc = mc_q(2.0, 1.4);
        mc.init_q_moment = Some(0.7);
        let c = constants_mz(&t, &mc, 2.0).unwrap();
        let expect = t.k(1).powi(2) * 0.7
            + 2.0 * (t.k(2).powi(2) * (1.4 + 0.01) + t.k(3).powi(2) * (0.25 * 1.4 + 0.04));
        assert!(close(c.tq, expect, 1e-14));
        assert!(constants_mz(&t, &mc_q(1.5, 1.0), 1.5).is_err());
    }

    #[test]
    fn vbe_moment_examples() {
        let mut mc = mc_q(1.0, 1.0);
        mc.init_q_moment = Some(1.0);
        assert!(close(constants_vbe_moment(&t_k15(), &mc, 1.0).unwrap().vq, 3.5, 1e-15));
        let mut mc = mc_q(2.0, 1.0);
        mc.init_q_moment = Some(1.0);
        assert!(close(constants_vbe_moment(&t_k15(), &mc, 2.0).unwrap().vq, 4.25, 1e-15));
        let zero = compute_K(&custom(vec![0.5], vec![0.0], vec![0.0]), 2).unwrap();
        assert!(close(constants_vbe_moment(&zero, &mc, 2.0).unwrap().vq, 2.25, 1e-15));
    }

    #[test]
    fn deterministic_init_has_zero_initial_moment() {
        let mc = mc_q(2.0, 1.0);
        let c = constants_mz(&t_k15(), &mc, 2.0).unwrap();
        assert!(close(c.tq, 2.0, 1e-15));
    }

    #[test]
    fn asymptotics_examples() {
        let grid = [100, 1000, 10_000];
        let s = make_schedule(Regime::C15, 0.0, 0.5, 1.0, None).unwrap();
        let r = asymptotics_report(&s, &grid).unwrap();
        assert!(r.rows.iter().all(|row| row.max_k_noise / 2.0 <= 2.0 + 1e-12));
        assert!(r.log_product_violations.is_empty());

        let s = make_schedule(Regime::C17, 1.0, 0.5, 1.0, None).unwrap();
        let r = asymptotics_report(&s, &grid).unwrap();
        let t = compute_K(&s, 10_000).unwrap();
        assert!(t.k_values.iter().all(|&k| k <= 2.0));
        assert!(r.rows.iter().all(|row| row.k1n <= 2.0));

        let s = make_schedule(Regime::C16, 0.25, 0.5, 1.0, None).unwrap();
        let r = asymptotics_report(&s, &grid).unwrap();
        for q in r.ratios(|row| row.max_k_tau_over) {
            assert!((0.5..=2.0).contains(&q), "{q}");
        }
        assert!(r.log_product_violations.is_empty());
    }

    #[test]
    fn strong_log_product_form_fails_for_positive_alpha() {
        // α = 0.5, ρ = 0.5, k = 1, l = 2: ln(ρ₂ρ₃) ≈ −0.777 while the form
        // carrying (1−α)^{−2} claims ≤ −1.155.
        let s = make_schedule(Regime::C16, 0.5, 0.5, 1.0, None).unwrap();
        let lp = s.eval(2).unwrap().0.ln() + s.eval(3).unwrap().0.ln();
        assert!(lp <= log_product_bound(0.5, 0.5, 1, 2, false));
        assert!(lp > log_product_bound(0.5, 0.5, 1, 2, true));
        let r = asymptotics_report(&s, &[100, 1000]).unwrap();
        assert!(r.log_product_violations.is_empty());
        assert!(r.log_product_strong_violations.contains(&(1, 2)));
    }

    #[test]
    fn custom_needs_classification() {
        let s = custom(vec![0.5; 200], vec![1.0; 200], vec![0.0; 200]);
        assert!(asymptotics_report(&s, &[10, 100]).is_err());
    }

    mod props {
        use super::super::*;
        use crate::schedules::{CustomSequences, Schedule};
        use proptest::prelude::*;

        fn schedule(n: usize) -> impl Strategy<Value = Schedule> {
            (
                prop::collection::vec(0.0..0.999f64, n),
                prop::collection::vec(0.0..5.0f64, n),
                prop::collection::vec(0.0..5.0f64, n),
            )
                .prop_map(|(rho, tau, xi)| Schedule::custom(CustomSequences { rho, tau, xi }).unwrap())
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(100))]

            #[test]
            fn backward_equals_direct_series(s in schedule(49), n in 2usize..=50) {
                let t = compute_K(&s, n).unwrap();
                for k in 1..=n {
                    let mut prod = 1.0;
                    let mut direct = 1.0;
                    for i in k + 1..=n {
                        prod *= s.eval(i).unwrap().0;
                        direct += prod;
                    }
                    prop_assert!((t.k(k) - direct).abs() <= 1e-12 * direct);
                    prop_assert!(t.k(k) >= 1.0);
                    if k < n {
                        let r = s.eval(k + 1).unwrap().0;
                        prop_assert!(t.k(k) <= 1.0 + r * (n - k) as f64 + 1e-12);
                    }
                }
            }

            #[test]
            fn mcdiarmid_cauchy_schwarz(s in schedule(30), t1 in 0.1..4.0f64) {
                let t = compute_K(&s, 31).unwrap();
                let mc = MomentConstants { t1: Some(t1), ..Default::default() };
                let c = constants_mcdiarmid(&t, &mc).unwrap();
                let max_term = t.terms().map(|(_, kk, tau, xi)| kk * (tau * t1 + xi)).fold(0.0, f64::max);
                prop_assert!(c.v2 <= c.d * max_term * (1.0 + 1e-12));
            }

            #[test]
            fn fuk_nagaev_order_two_matches_variance(s in schedule(30), a in 0.1..4.0f64) {
                let t = compute_K(&s, 31).unwrap();
                let mc = MomentConstants {
                    q: Some(2.0),
                    second_moment: Some(a),
                    noise_q_moment: Some(a),
                    ..Default::default()
                };
                let c = constants_fuk_nagaev(&t, &mc, 2.0).unwrap();
                prop_assert!((c.hq - c.v2).abs() <= 1e-12 * c.v2.max(1.0));
            }
        }
    }
}
