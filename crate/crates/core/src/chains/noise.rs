//! Innovation laws and their dominating function `G_ε(y) = E δ(y, ε′)`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{invalid, Result};
use crate::norms::NormIndex;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    /// i.i.d. `N(0, σ²)` coordinates.
    Gaussian { sigma: f64, d: usize },
    /// i.i.d. equiprobable `±1` coordinates.
    UniformPm1 { d: usize },
    /// Scalar law `P(ε = a) = pr`, `P(ε = b) = 1 − pr`.
    TwoAtom { a: f64, b: f64, pr: f64 },
    /// i.i.d. uniform coordinates on `[lo, hi]`.
    BoundedUniform { lo: f64, hi: f64, d: usize },
    /// `ε ≡ 0` (noiseless chain).
    Zero { d: usize },
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseSpec::Gaussian { sigma, d } => {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(invalid("noise.sigma", format!("needs sigma > 0, got {sigma}")));
                }
                check_dim(d)
            }
            NoiseSpec::UniformPm1 { d } | NoiseSpec::Zero { d } => check_dim(d),
            NoiseSpec::TwoAtom { a, b, pr } => {
                if !(pr > 0.0 && pr < 1.0) {
                    return Err(invalid("noise.pr", format!("needs pr in (0, 1), got {pr}")));
                }
                if !(a.is_finite() && b.is_finite()) || a == b {
                    return Err(invalid("noise.a/b", "atoms must be finite and distinct"));
                }
                Ok(())
            }
            NoiseSpec::BoundedUniform { lo, hi, d } => {
                if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                    return Err(invalid("noise.lo/hi", format!("needs lo < hi, got [{lo}, {hi}]")));
                }
                check_dim(d)
            }
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            NoiseSpec::Gaussian { d, .. }
            | NoiseSpec::UniformPm1 { d }
            | NoiseSpec::BoundedUniform { d, .. }
            | NoiseSpec::Zero { d } => d,
            NoiseSpec::TwoAtom { .. } => 1,
        }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, NoiseSpec::Gaussian { .. })
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match *self {
            NoiseSpec::Gaussian { sigma, .. } => {
                for v in out.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *v = sigma * z;
                }
            }
            NoiseSpec::UniformPm1 { .. } => {
                for v in out.iter_mut() {
                    *v = if rng.random::<bool>() { 1.0 } else { -1.0 };
                }
            }
            NoiseSpec::TwoAtom { a, b, pr } => {
                for v in out.iter_mut() {
                    *v = if rng.random::<f64>() < pr { a } else { b };
                }
            }
            NoiseSpec::BoundedUniform { lo, hi, .. } => {
                for v in out.iter_mut() {
                    *v = rng.random_range(lo..hi);
                }
            }
            NoiseSpec::Zero { .. } => out.fill(0.0),
        }
    }

    /// Per-coordinate mean.
    pub fn mean(&self) -> f64 {
        match *self {
            NoiseSpec::Gaussian { .. } | NoiseSpec::UniformPm1 { .. } | NoiseSpec::Zero { .. } => 0.0,
            NoiseSpec::TwoAtom { a, b, pr } => pr * a + (1.0 - pr) * b,
            NoiseSpec::BoundedUniform { lo, hi, .. } => 0.5 * (lo + hi),
        }
    }

    /// Per-coordinate variance.
    pub fn variance(&self) -> f64 {
        match *self {
            NoiseSpec::Gaussian { sigma, .. } => sigma * sigma,
            NoiseSpec::UniformPm1 { .. } => 1.0,
            NoiseSpec::TwoAtom { a, b, pr } => pr * (1.0 - pr) * (a - b) * (a - b),
            NoiseSpec::BoundedUniform { lo, hi, .. } => (hi - lo) * (hi - lo) / 12.0,
            NoiseSpec::Zero { .. } => 0.0,
        }
    }

    /// Atoms with probabilities for finite laws with at most 2^16 atoms.
    pub fn atoms(&self) -> Option<Vec<(Vec<f64>, f64)>> {
        match *self {
            NoiseSpec::TwoAtom { a, b, pr } => Some(vec![(vec![a], pr), (vec![b], 1.0 - pr)]),
            NoiseSpec::Zero { d } => Some(vec![(vec![0.0; d], 1.0)]),
            NoiseSpec::UniformPm1 { d } if d <= 16 => {
                let w = 0.5f64.powi(d as i32);
                Some(
                    (0..1usize << d)
                        .map(|mask| {
                            let v = (0..d)
                                .map(|i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 })
                                .collect();
                            (v, w)
                        })
                        .collect(),
                )
            }
            _ => None,
        }
    }

    /// `ess sup ‖ε − ε′‖_p`, infinite for Gaussian noise.
    pub fn diameter(&self, p: NormIndex) -> f64 {
        let d = self.dim();
        match *self {
            NoiseSpec::Gaussian { .. } => f64::INFINITY,
            NoiseSpec::UniformPm1 { .. } => 2.0 * p.dim_factor(d),
            NoiseSpec::TwoAtom { a, b, .. } => (a - b).abs(),
            NoiseSpec::BoundedUniform { lo, hi, .. } => (hi - lo) * p.dim_factor(d),
            NoiseSpec::Zero { .. } => 0.0,
        }
    }

    /// Upper bound on `E‖ε − c‖_p` for the natural centre `c` (0 for
    /// symmetric laws, the midpoint for uniform noise).
    pub fn mean_norm_bound(&self, p: NormIndex) -> f64 {
        let d = self.dim();
        match *self {
            NoiseSpec::Gaussian { sigma, .. } => {
                if p.is_inf() {
                    sigma * (2.0 * (2.0 * d as f64).ln()).sqrt()
                } else {
                    // Jensen: E‖ε‖_p ≤ (E‖ε‖_p^p)^{1/p} = σ d^{1/p} (E|Z|^p)^{1/p}.
                    let pv = p.value();
                    let abs_moment = 2f64.powf(pv / 2.0) * statrs::function::gamma::gamma((pv + 1.0) / 2.0)
                        / std::f64::consts::PI.sqrt();
                    sigma * p.dim_factor(d) * abs_moment.powf(1.0 / pv)
                }
            }
            NoiseSpec::UniformPm1 { .. } => p.dim_factor(d),
            NoiseSpec::TwoAtom { a, b, .. } => 0.5 * (a - b).abs(),
            NoiseSpec::BoundedUniform { lo, hi, .. } => 0.5 * (hi - lo) * p.dim_factor(d),
            NoiseSpec::Zero { .. } => 0.0,
        }
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 {
        Err(invalid("noise.d", "dimension must be at least 1"))
    } else {
        Ok(())
    }
}

/// Standard normal upper tail `P(Z > z)`.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// `E|y − ε′|` for `ε′ ~ N(0, σ²)` (folded-normal mean).
pub fn gaussian_g(y: f64, sigma: f64) -> f64 {
    let z = y / sigma;
    sigma * (2.0 / std::f64::consts::PI).sqrt() * (-0.5 * z * z).exp() + y * (1.0 - 2.0 * normal_sf(z))
}

/// `E|y − U|` for `U ~ Unif[lo, hi]`.
pub fn uniform_g(y: f64, lo: f64, hi: f64) -> f64 {
    if y <= lo {
        0.5 * (lo + hi) - y
    } else if y >= hi {
        y - 0.5 * (lo + hi)
    } else {
        ((y - lo).powi(2) + (hi - y).powi(2)) / (2.0 * (hi - lo))
    }
}

/// `G_ε(ε)` for `UniformPm1` noise, which is the same at every atom:
/// `E[2 K^{1/p}]` with `K ~ Bin(d, 1/2)` (`2 P(K ≥ 1)` for `p = ∞`).
pub fn pm1_g(d: usize, p: NormIndex) -> f64 {
    let mut total = 0.0;
    let mut binom = 1.0f64;
    let w = 0.5f64.powi(d as i32);
    for k in 0..=d {
        if k > 0 {
            binom *= (d - k + 1) as f64 / k as f64;
            let norm = if p.is_inf() {
                2.0
            } else {
                2.0 * (k as f64).powf(1.0 / p.value())
            };
            total += binom * w * norm;
        }
    }
    total
}
