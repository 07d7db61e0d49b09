//! Coefficient sequences `(ρ_n, τ_n, ξ_n)` and their regime classification.
//!
//! The three regimes are
//!
//! * `C15`: `ρ_n ≤ 1 − ρ/n^α`, `max{ξ_n, τ_n} ≤ η/n^α`, `α ∈ [0, 1)`
//! * `C16`: `ρ_n ≤ 1 − ρ/n^α`, `max{ξ_n, τ_n} ≤ η`, `α ∈ (0, 1)`
//! * `C17`: `ρ_n ≤ ρ`, `max{ξ_n, τ_n} ≤ η/n^α`, `α ∈ (0, 1]`
//!
//! Canonical schedules take these inequalities with equality. Custom and
//! model-implied schedules carry their own sequences and may be classified
//! against a regime after validation.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{invalid, BoundError, Result};

/// Number of indices checked when validating a sequence law against a regime.
pub const LAW_CHECK_LIMIT: usize = 10_000;

const REGIME_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    C15,
    C16,
    C17,
    Custom,
}

impl Regime {
    pub fn tag(self) -> &'static str {
        match self {
            Regime::C15 => "C15",
            Regime::C16 => "C16",
            Regime::C17 => "C17",
            Regime::Custom => "Custom",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Regime constants `(α, ρ, η)` attached to a non-custom regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeParams {
    pub regime: Regime,
    pub alpha: f64,
    pub rho: f64,
    pub eta: f64,
}

impl RegimeParams {
    pub fn new(regime: Regime, alpha: f64, rho: f64, eta: f64) -> Result<Self> {
        let alpha_ok = match regime {
            Regime::C15 => (0.0..1.0).contains(&alpha),
            Regime::C16 => alpha > 0.0 && alpha < 1.0,
            Regime::C17 => alpha > 0.0 && alpha <= 1.0,
            Regime::Custom => {
                return Err(invalid("regime", "Custom carries no regime constants"));
            }
        };
        if !alpha_ok {
            let range = match regime {
                Regime::C15 => "[0, 1)",
                Regime::C16 => "(0, 1)",
                _ => "(0, 1]",
            };
            return Err(invalid(
                "alpha",
                format!("regime {regime} needs alpha in {range}, got {alpha}"),
            ));
        }
        if !(rho > 0.0 && rho < 1.0) {
            return Err(invalid("rho", format!("needs rho in (0, 1), got {rho}")));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(invalid("eta", format!("needs eta > 0, got {eta}")));
        }
        Ok(RegimeParams {
            regime,
            alpha,
            rho,
            eta,
        })
    }

    /// Upper bound the regime places on `ρ_n`.
    pub fn rho_cap(&self, n: usize) -> f64 {
        match self.regime {
            Regime::C17 => self.rho,
            _ => 1.0 - self.rho / (n as f64).powf(self.alpha),
        }
    }

    /// Upper bound the regime places on `max{τ_n, ξ_n}`.
    pub fn noise_cap(&self, n: usize) -> f64 {
        match self.regime {
            Regime::C16 => self.eta,
            _ => self.eta / (n as f64).powf(self.alpha),
        }
    }

    /// Checks one triple against the regime inequalities.
    pub fn check(&self, n: usize, rho_n: f64, tau_n: f64, xi_n: f64) -> Result<()> {
        let cap = self.rho_cap(n);
        if rho_n > cap + REGIME_TOL * cap.abs().max(1.0) {
            return Err(BoundError::RegimeViolation {
                regime: self.regime.tag(),
                n,
                condition: format!("rho_n = {rho_n} exceeds {cap}"),
            });
        }
        let ncap = self.noise_cap(n);
        let m = tau_n.max(xi_n);
        if m > ncap + REGIME_TOL * ncap.max(1.0) {
            return Err(BoundError::RegimeViolation {
                regime: self.regime.tag(),
                n,
                condition: format!("max(tau_n, xi_n) = {m} exceeds {ncap}"),
            });
        }
        Ok(())
    }
}

/// Law for `ρ_n` used by model-implied schedules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RhoLaw {
    Constant(f64),
    /// `|1 − c/n^α|`, maximised with `|1 − c_max/n^α|` when a spread of
    /// eigenvalues is present (`c_max ≥ c`).
    OneMinusPower { c: f64, c_max: f64, alpha: f64 },
    /// `1/(1 + c/n^α)`.
    InverseOnePlusPower { c: f64, alpha: f64 },
    /// `√((1 − mγ/n^α)² + (ℓ² − m²)γ²/n^{2α})`.
    GradientStep { m_gamma: f64, l_gamma: f64, alpha: f64 },
}

impl RhoLaw {
    pub fn eval(&self, n: usize) -> f64 {
        let nf = n as f64;
        match *self {
            RhoLaw::Constant(r) => r,
            RhoLaw::OneMinusPower { c, c_max, alpha } => {
                let s = nf.powf(alpha);
                (1.0 - c / s).abs().max((1.0 - c_max / s).abs())
            }
            RhoLaw::InverseOnePlusPower { c, alpha } => 1.0 / (1.0 + c / nf.powf(alpha)),
            RhoLaw::GradientStep {
                m_gamma,
                l_gamma,
                alpha,
            } => {
                let s = nf.powf(alpha);
                let a = 1.0 - m_gamma / s;
                (a * a + (l_gamma * l_gamma - m_gamma * m_gamma) / (s * s)).sqrt()
            }
        }
    }
}

/// `scale / n^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    pub scale: f64,
    pub exponent: f64,
}

impl PowerLaw {
    pub const ZERO: PowerLaw = PowerLaw {
        scale: 0.0,
        exponent: 0.0,
    };

    pub fn constant(scale: f64) -> Self {
        PowerLaw {
            scale,
            exponent: 0.0,
        }
    }

    pub fn eval(&self, n: usize) -> f64 {
        if self.scale == 0.0 {
            0.0
        } else {
            self.scale / (n as f64).powf(self.exponent)
        }
    }
}

/// Explicit sequences; entry `i` holds the value at index `n = i + 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomSequences {
    pub rho: Vec<f64>,
    pub tau: Vec<f64>,
    pub xi: Vec<f64>,
}

impl CustomSequences {
    /// Largest index `n` at which all three sequences are defined.
    pub fn last_index(&self) -> usize {
        self.rho.len().min(self.tau.len()).min(self.xi.len()) + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Sequences {
    Canonical,
    Laws {
        rho: RhoLaw,
        tau: PowerLaw,
        xi: PowerLaw,
    },
    Explicit(CustomSequences),
}

/// The sequences `(ρ_n, τ_n, ξ_n)` for `n ≥ 2` plus their regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    regime: Regime,
    params: Option<RegimeParams>,
    sequences: Sequences,
}

/// Builds a schedule. Canonical regimes need `custom = None`; `Regime::Custom`
/// needs nonempty explicit sequences (`alpha`, `rho`, `eta` are ignored).
pub fn make_schedule(
    regime: Regime,
    alpha: f64,
    rho: f64,
    eta: f64,
    custom: Option<CustomSequences>,
) -> Result<Schedule> {
    match regime {
        Regime::Custom => {
            let seqs = custom.ok_or_else(|| invalid("custom", "regime Custom needs sequences"))?;
            Schedule::custom(seqs)
        }
        _ => {
            if custom.is_some() {
                return Err(invalid(
                    "custom",
                    "explicit sequences need regime Custom (classify them afterwards)",
                ));
            }
            Ok(Schedule {
                regime,
                params: Some(RegimeParams::new(regime, alpha, rho, eta)?),
                sequences: Sequences::Canonical,
            })
        }
    }
}

/// Accessor form of [`Schedule::eval`].
pub fn eval_schedule(s: &Schedule, n: usize) -> Result<(f64, f64, f64)> {
    s.eval(n)
}

impl Schedule {
    pub fn canonical(regime: Regime, alpha: f64, rho: f64, eta: f64) -> Result<Self> {
        make_schedule(regime, alpha, rho, eta, None)
    }

    pub fn custom(seqs: CustomSequences) -> Result<Self> {
        if seqs.rho.is_empty() || seqs.tau.is_empty() || seqs.xi.is_empty() {
            return Err(invalid("custom", "sequences must be nonempty"));
        }
        for (i, &r) in seqs.rho.iter().enumerate() {
            if !(0.0..1.0).contains(&r) {
                return Err(invalid("custom.rho", format!("rho_{} = {r} not in [0, 1)", i + 2)));
            }
        }
        for (name, v) in [("custom.tau", &seqs.tau), ("custom.xi", &seqs.xi)] {
            if let Some((i, x)) = v.iter().enumerate().find(|(_, x)| !(**x >= 0.0 && x.is_finite())) {
                return Err(invalid(name, format!("entry at n = {} is {x}", i + 2)));
            }
        }
        Ok(Schedule {
            regime: Regime::Custom,
            params: None,
            sequences: Sequences::Explicit(seqs),
        })
    }

    /// Schedule given by closed-form laws (used by chain models).
    pub fn from_laws(rho: RhoLaw, tau: PowerLaw, xi: PowerLaw) -> Result<Self> {
        let s = Schedule {
            regime: Regime::Custom,
            params: None,
            sequences: Sequences::Laws { rho, tau, xi },
        };
        for n in 2..=LAW_CHECK_LIMIT {
            let (r, t, x) = s.eval(n)?;
            if !(0.0..1.0).contains(&r) {
                return Err(invalid("rho", format!("rho_{n} = {r} not in [0, 1)")));
            }
            if !(t >= 0.0 && x >= 0.0 && t.is_finite() && x.is_finite()) {
                return Err(invalid("tau/xi", format!("negative or non-finite value at n = {n}")));
            }
        }
        Ok(s)
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    /// Regime constants: the canonical parameters or the stored classification.
    pub fn params(&self) -> Option<RegimeParams> {
        self.params
    }

    pub fn is_canonical(&self) -> bool {
        matches!(self.sequences, Sequences::Canonical)
    }

    /// Largest index the schedule can evaluate (`usize::MAX` for laws).
    pub fn last_index(&self) -> usize {
        match &self.sequences {
            Sequences::Explicit(c) => c.last_index(),
            _ => usize::MAX,
        }
    }

    /// `(ρ_n, τ_n, ξ_n)` for `n ≥ 2`.
    pub fn eval(&self, n: usize) -> Result<(f64, f64, f64)> {
        if n < 2 {
            return Err(BoundError::HorizonTooSmall(n));
        }
        match &self.sequences {
            Sequences::Canonical => {
                let p = self.params.expect("canonical schedules carry parameters");
                let rho_n = p.rho_cap(n).max(0.0);
                let noise = p.noise_cap(n);
                Ok((rho_n, noise, noise))
            }
            Sequences::Laws { rho, tau, xi } => Ok((rho.eval(n), tau.eval(n), xi.eval(n))),
            Sequences::Explicit(c) => {
                let last = c.last_index();
                if n > last {
                    return Err(BoundError::ScheduleExhausted { n, last });
                }
                let i = n - 2;
                Ok((c.rho[i], c.tau[i], c.xi[i]))
            }
        }
    }

    /// Validates the sequences against `params` and stores the classification.
    pub fn classify(mut self, params: RegimeParams) -> Result<Self> {
        if self.is_canonical() {
            return Err(invalid("classify", "canonical schedules are already classified"));
        }
        let last = self.last_index().min(LAW_CHECK_LIMIT);
        for n in 2..=last {
            let (r, t, x) = self.eval(n)?;
            params.check(n, r, t, x)?;
        }
        self.regime = params.regime;
        self.params = Some(params);
        Ok(self)
    }

    /// Classifies with the tightest constants the sequences admit on the
    /// checked range: `ρ = inf n^α(1 − ρ_n)` (or `sup ρ_n` for C17) and
    /// `η = sup max{τ_n, ξ_n}·n^α` (or without `n^α` for C16).
    pub fn classify_tightest(self, regime: Regime, alpha: f64) -> Result<Self> {
        let last = self.last_index().min(LAW_CHECK_LIMIT);
        let mut rho_c = f64::INFINITY;
        let mut eta_c: f64 = 0.0;
        for n in 2..=last {
            let (r, t, x) = self.eval(n)?;
            let s = (n as f64).powf(alpha);
            match regime {
                Regime::C17 => rho_c = if rho_c.is_infinite() { r } else { rho_c.max(r) },
                _ => rho_c = rho_c.min(s * (1.0 - r)),
            }
            let m = t.max(x);
            eta_c = eta_c.max(match regime {
                Regime::C16 => m,
                _ => m * s,
            });
        }
        if regime == Regime::C17 && rho_c == 0.0 {
            rho_c = f64::MIN_POSITIVE;
        }
        if regime != Regime::C17 {
            rho_c = rho_c.min(1.0 - 1e-15);
        }
        if eta_c == 0.0 {
            eta_c = f64::MIN_POSITIVE;
        }
        let params = RegimeParams::new(regime, alpha, rho_c, eta_c)?;
        self.classify(params)
    }
}
