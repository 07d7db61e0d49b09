//! Tail envelopes `u ↦ bound on P(‖S_n‖_p ≥ u)`.
//!
//! Every envelope splits into the initial-state term `I₁(x)` and a
//! martingale term, evaluated at `x = u·d^{−1/p}` and clamped to `[0, 1]`.

pub mod hoeffding;
pub mod young;

use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

use crate::coefficients::{weak_constant, BoundConstants, BoundKind};
use crate::error::{invalid, BoundError, Result};
use crate::norms::NormIndex;

pub use hoeffding::{bennett, bernstein as bernstein_b1, hoeffding_h};
pub use young::{ell, ell_star, ell_star_floor};

/// Values below this are reported as 0 (with [`EnvelopeValue::underflow`]).
pub const UNDERFLOW: f64 = 1e-300;

/// Tail hypothesis on the initial state, through `G_{X₁}(X₁)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialTailSpec {
    #[default]
    Deterministic,
    /// `P(G_{X₁} ≥ x) ≤ c⁻¹ e^{−cx}`.
    ExpTail { c: f64 },
    /// `P(G_{X₁} ≥ x) ≤ c⁻¹ e^{−c x^q}`.
    SemiExpTail { c: f64, q: f64 },
    /// `P(G_{X₁} ≥ x) ≤ c x^{−q}`.
    PolyTail { c: f64, q: f64 },
    /// `‖d(X₁, X₁′)‖_∞ ≤ t0`.
    BoundedDiameter { t0: f64 },
}

impl InitialTailSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            InitialTailSpec::Deterministic => true,
            InitialTailSpec::ExpTail { c } => c > 0.0,
            InitialTailSpec::SemiExpTail { c, q } | InitialTailSpec::PolyTail { c, q } => c > 0.0 && q > 0.0,
            InitialTailSpec::BoundedDiameter { t0 } => t0 >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(invalid("init_tail", format!("{self:?} needs c > 0, q > 0, t0 >= 0")))
        }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(
            self,
            InitialTailSpec::Deterministic | InitialTailSpec::BoundedDiameter { .. }
        )
    }
}

/// The initial-state term `I₁(x)` (not clamped).
pub fn i1_term(x: f64, k1n: f64, d: usize, init: &InitialTailSpec) -> f64 {
    let d = d as f64;
    let z = x / (2.0 * k1n);
    match *init {
        InitialTailSpec::Deterministic => 0.0,
        InitialTailSpec::ExpTail { c } => d / c * (-c * z).exp(),
        InitialTailSpec::SemiExpTail { c, q } => d / c * (-c * z.powf(q)).exp(),
        InitialTailSpec::PolyTail { c, q } => c * d * z.powf(-q),
        InitialTailSpec::BoundedDiameter { t0 } => {
            if x > 2.0 * k1n * t0 {
                0.0
            } else {
                1.0
            }
        }
    }
}

/// Anything that upper-bounds `P(‖S_n‖_p ≥ u)`.
pub trait TailBound {
    fn tail_bound(&self, u: f64) -> f64;
    fn label(&self) -> String;
    /// `(n, d, p)` the bound was built for, if known.
    fn meta(&self) -> Option<(usize, usize, NormIndex)>;
}

/// Setting shared by all envelopes of one chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeSetup {
    pub n: usize,
    pub d: usize,
    pub p: NormIndex,
    pub k1n: f64,
    pub init: InitialTailSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Form {
    BernsteinRefined,
    BernsteinRelaxed,
    SemiExp,
    FukNagaev,
    Vbe,
    Weak,
    McDiarmidRio,
    McDiarmidPower,
    McDiarmidGaussian,
    Hoeffding,
    HoeffdingBennett,
    HoeffdingBernstein,
}

impl Form {
    pub fn kind(self) -> BoundKind {
        match self {
            Form::BernsteinRefined | Form::BernsteinRelaxed => BoundKind::Bernstein,
            Form::SemiExp => BoundKind::SemiExp,
            Form::FukNagaev => BoundKind::FukNagaev,
            Form::Vbe => BoundKind::VBE,
            Form::Weak => BoundKind::WeakMoment,
            Form::McDiarmidRio | Form::McDiarmidPower | Form::McDiarmidGaussian => BoundKind::McDiarmid,
            Form::Hoeffding | Form::HoeffdingBennett | Form::HoeffdingBernstein => BoundKind::Hoeffding,
        }
    }

    pub fn forms_of(kind: BoundKind) -> &'static [Form] {
        match kind {
            BoundKind::Bernstein => &[Form::BernsteinRefined, Form::BernsteinRelaxed],
            BoundKind::SemiExp => &[Form::SemiExp],
            BoundKind::FukNagaev => &[Form::FukNagaev],
            BoundKind::VBE => &[Form::Vbe],
            BoundKind::WeakMoment => &[Form::Weak],
            BoundKind::McDiarmid => &[Form::McDiarmidRio, Form::McDiarmidPower, Form::McDiarmidGaussian],
            BoundKind::Hoeffding => &[Form::Hoeffding, Form::HoeffdingBennett, Form::HoeffdingBernstein],
            BoundKind::MZ | BoundKind::VBEMoment => &[],
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Form::BernsteinRefined => "bernstein_refined",
            Form::BernsteinRelaxed => "bernstein_relaxed",
            Form::SemiExp => "semiexp",
            Form::FukNagaev => "fuk_nagaev",
            Form::Vbe => "vbe",
            Form::Weak => "weak",
            Form::McDiarmidRio => "mcdiarmid_rio",
            Form::McDiarmidPower => "mcdiarmid_power",
            Form::McDiarmidGaussian => "mcdiarmid_gaussian",
            Form::Hoeffding => "hoeffding",
            Form::HoeffdingBennett => "hoeffding_bennett",
            Form::HoeffdingBernstein => "hoeffding_bernstein",
        }
    }
}

impl fmt::Display for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// How the Hoeffding envelope controls `max_k G_ε(ε_k)`.
#[derive(Clone)]
pub enum HoeffdingNoise {
    /// `G_ε(ε) ≤ T` almost surely.
    Bounded(f64),
    /// `y ↦ P(G_ε(ε) > y)` for a single draw; the free level `y` is chosen
    /// per threshold from a 64-point log grid.
    General(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for HoeffdingNoise {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HoeffdingNoise::Bounded(t) => write!(f, "Bounded({t})"),
            HoeffdingNoise::General(_) => f.write_str("General(..)"),
        }
    }
}

/// One evaluation of an envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeValue {
    pub u: f64,
    pub x: f64,
    pub total: f64,
    pub i1: f64,
    pub martingale: f64,
    pub underflow: bool,
}

#[derive(Debug, Clone)]
pub struct BoundEnvelope {
    pub form: Form,
    pub constants: BoundConstants,
    pub setup: EnvelopeSetup,
    hoeffding: Option<HoeffdingNoise>,
    /// Effective variance used by the semi-exponential form.
    semi_v2: f64,
}

const HOEFFDING_Y_GRID: usize = 64;

fn log_grid(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..m)
        .map(|i| (a + (b - a) * i as f64 / (m - 1) as f64).exp())
        .collect()
}

impl BoundEnvelope {
    fn build(form: Form, bc: &BoundConstants, setup: EnvelopeSetup) -> Result<Self> {
        if bc.kind != form.kind() {
            return Err(invalid(
                "form",
                format!("{form} needs {} constants, got {}", form.kind(), bc.kind),
            ));
        }
        setup.init.validate()?;
        if setup.d == 0 || setup.n < 2 || !(setup.k1n >= 1.0) {
            return Err(invalid("setup", "needs d >= 1, n >= 2, K_1n >= 1"));
        }
        Ok(BoundEnvelope {
            form,
            constants: *bc,
            setup,
            hoeffding: None,
            semi_v2: 0.0,
        })
    }

    pub fn x_of(&self, u: f64) -> f64 {
        u / self.setup.p.dim_factor(self.setup.d)
    }

    /// `ln` of the martingale term at `x > 0`, before clamping.
    fn ln_martingale(&self, x: f64) -> f64 {
        let c = &self.constants;
        let d = self.setup.d as f64;
        let ln2d = (2.0 * d).ln();
        let half = x / 2.0;
        match self.form {
            Form::BernsteinRefined | Form::BernsteinRelaxed => {
                let den = if self.form == Form::BernsteinRefined {
                    c.v2 + (c.v2 * c.v2 + x * c.delta * c.v2).sqrt() + c.delta * x / 2.0
                } else {
                    2.0 * c.v2 + c.delta * x
                };
                if den == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    ln2d - half * half / den
                }
            }
            Form::SemiExp => {
                let den = 2.0 * (self.semi_v2 + half.powf(2.0 - c.q) * c.delta.powf(c.q));
                (4.0 * d).ln() - half * half / den
            }
            Form::FukNagaev => {
                let q = c.q;
                let poly = 2f64.powf(q + 1.0) * d * (1.0 + 2.0 / q).powf(q) * c.hq / x.powf(q);
                let gauss = if c.v2 == 0.0 {
                    0.0
                } else {
                    2.0 * d * (-x * x / (2.0 * (q + 2.0).powi(2) * q.exp() * c.v2)).exp()
                };
                (poly + gauss).ln()
            }
            Form::Vbe => (2f64.powf(c.q) * d * c.vq / x.powf(c.q)).ln(),
            Form::Weak => {
                let cdq = weak_constant(self.setup.d, c.q).expect("validated at construction");
                (cdq * c.bq / x.powf(c.q)).ln()
            }
            Form::McDiarmidRio | Form::McDiarmidPower | Form::McDiarmidGaussian => {
                if c.d == 0.0 || x >= 2.0 * c.d {
                    return f64::NEG_INFINITY;
                }
                let expo = match self.form {
                    Form::McDiarmidRio => c.d * c.d / c.v2 * ell_star(x / (2.0 * c.d)),
                    Form::McDiarmidPower => {
                        -((c.d * x - half * half) / c.v2) * (-x / (2.0 * c.d)).ln_1p()
                    }
                    _ => x * x / (2.0 * c.v2),
                };
                ln2d - expo
            }
            Form::Hoeffding | Form::HoeffdingBennett | Form::HoeffdingBernstein => {
                if c.delta == 0.0 {
                    return f64::NEG_INFINITY;
                }
                let n = self.setup.n as f64;
                let h = |y: f64| {
                    let s = (y + 1.0) * c.delta;
                    let (a, v) = (x / (2.0 * s), c.v2.sqrt() / s);
                    match self.form {
                        Form::Hoeffding => hoeffding::ln_hoeffding_h(a, v, n),
                        Form::HoeffdingBennett => hoeffding::ln_bennett(a, v),
                        _ => hoeffding::ln_bernstein(a, v),
                    }
                };
                match self.hoeffding.as_ref().expect("set at construction") {
                    HoeffdingNoise::Bounded(t) => ln2d + h(*t),
                    HoeffdingNoise::General(tail) => {
                        let draws = (self.setup.n - 1) as i32;
                        log_grid(1e-3, 1e3, HOEFFDING_Y_GRID)
                            .into_iter()
                            .map(|y| {
                                let p = tail(y).clamp(0.0, 1.0);
                                let pmax = -(draws as f64 * (-p).ln_1p()).exp_m1();
                                (2.0 * d * (h(y).exp() + pmax)).ln()
                            })
                            .fold(f64::INFINITY, f64::min)
                    }
                }
            }
        }
    }

    pub fn eval_parts(&self, u: f64) -> EnvelopeValue {
        let x = self.x_of(u);
        if !(x > 0.0) {
            return EnvelopeValue {
                u,
                x,
                total: 1.0,
                i1: 1.0,
                martingale: 1.0,
                underflow: false,
            };
        }
        let i1 = i1_term(x, self.setup.k1n, self.setup.d, &self.setup.init);
        let ln_m = self.ln_martingale(x);
        let mut underflow = false;
        let martingale = if ln_m < UNDERFLOW.ln() {
            underflow = ln_m.is_finite();
            0.0
        } else {
            ln_m.exp()
        };
        let mut total = (i1 + martingale).min(1.0);
        if total > 0.0 && total < UNDERFLOW {
            total = 0.0;
            underflow = true;
        }
        EnvelopeValue {
            u,
            x,
            total,
            i1,
            martingale,
            underflow,
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.eval_parts(u).total
    }
}

impl TailBound for BoundEnvelope {
    fn tail_bound(&self, u: f64) -> f64 {
        self.eval(u)
    }

    fn label(&self) -> String {
        match self.form {
            Form::FukNagaev | Form::Vbe | Form::Weak | Form::SemiExp => {
                format!("{}_q{}", self.form.tag(), self.constants.q)
            }
            _ => self.form.tag().to_string(),
        }
    }

    fn meta(&self) -> Option<(usize, usize, NormIndex)> {
        Some((self.setup.n, self.setup.d, self.setup.p))
    }
}

pub fn bernstein_envelope(bc: &BoundConstants, setup: EnvelopeSetup, form: Form) -> Result<BoundEnvelope> {
    if !matches!(form, Form::BernsteinRefined | Form::BernsteinRelaxed) {
        return Err(invalid("form", format!("{form} is not a Bernstein form")));
    }
    BoundEnvelope::build(form, bc, setup)
}

/// Refuses with `NotApplicable` when `V_n < 1`. The variance used is
/// `max(V_n², δ_n²)`: the underlying martingale inequality needs
/// `V_n/δ_n ≥ 1`, and enlarging `V_n²` only weakens the bound.
pub fn semiexp_envelope(bc: &BoundConstants, setup: EnvelopeSetup) -> Result<BoundEnvelope> {
    let mut e = BoundEnvelope::build(Form::SemiExp, bc, setup)?;
    if !(bc.q > 0.0 && bc.q < 1.0) {
        return Err(BoundError::OrderOutOfRange { q: bc.q, range: "(0, 1)" });
    }
    if bc.v2 < 1.0 {
        return Err(BoundError::NotApplicable(format!(
            "semi-exponential bound needs V_n >= 1, got V_n = {}",
            bc.v2.sqrt()
        )));
    }
    e.semi_v2 = bc.v2.max(bc.delta * bc.delta);
    Ok(e)
}

pub fn fuk_nagaev_envelope(bc: &BoundConstants, setup: EnvelopeSetup) -> Result<BoundEnvelope> {
    if bc.q < 2.0 {
        return Err(BoundError::OrderOutOfRange { q: bc.q, range: "[2, inf)" });
    }
    BoundEnvelope::build(Form::FukNagaev, bc, setup)
}

pub fn vbe_envelope(bc: &BoundConstants, setup: EnvelopeSetup) -> Result<BoundEnvelope> {
    if !(1.0..=2.0).contains(&bc.q) {
        return Err(BoundError::OrderOutOfRange { q: bc.q, range: "[1, 2]" });
    }
    BoundEnvelope::build(Form::Vbe, bc, setup)
}

pub fn weak_envelope(bc: &BoundConstants, setup: EnvelopeSetup) -> Result<BoundEnvelope> {
    weak_constant(setup.d, bc.q)?;
    BoundEnvelope::build(Form::Weak, bc, setup)
}

/// The McDiarmid forms need a bounded initial spread.
pub fn mcdiarmid_envelope(bc: &BoundConstants, setup: EnvelopeSetup, form: Form) -> Result<BoundEnvelope> {
    if !matches!(
        form,
        Form::McDiarmidRio | Form::McDiarmidPower | Form::McDiarmidGaussian
    ) {
        return Err(invalid("form", format!("{form} is not a McDiarmid form")));
    }
    if !setup.init.is_bounded() {
        return Err(BoundError::NotApplicable(
            "McDiarmid bounds need a deterministic or bounded-diameter initial state".into(),
        ));
    }
    BoundEnvelope::build(form, bc, setup)
}

pub fn hoeffding_envelope(
    bc: &BoundConstants,
    setup: EnvelopeSetup,
    form: Form,
    noise: HoeffdingNoise,
) -> Result<BoundEnvelope> {
    if !matches!(
        form,
        Form::Hoeffding | Form::HoeffdingBennett | Form::HoeffdingBernstein
    ) {
        return Err(invalid("form", format!("{form} is not a Hoeffding form")));
    }
    if let HoeffdingNoise::Bounded(t) = noise {
        if !(t > 0.0 && t.is_finite()) {
            return Err(invalid("g_sup", format!("needs T > 0, got {t}")));
        }
    }
    let mut e = BoundEnvelope::build(form, bc, setup)?;
    e.hoeffding = Some(noise);
    Ok(e)
}

/// Builds one envelope of any tail form. `noise` is needed for the Hoeffding
/// forms only.
pub fn envelope(
    form: Form,
    bc: &BoundConstants,
    setup: EnvelopeSetup,
    noise: Option<HoeffdingNoise>,
) -> Result<BoundEnvelope> {
    match form.kind() {
        BoundKind::Bernstein => bernstein_envelope(bc, setup, form),
        BoundKind::SemiExp => semiexp_envelope(bc, setup),
        BoundKind::FukNagaev => fuk_nagaev_envelope(bc, setup),
        BoundKind::VBE => vbe_envelope(bc, setup),
        BoundKind::WeakMoment => weak_envelope(bc, setup),
        BoundKind::McDiarmid => mcdiarmid_envelope(bc, setup, form),
        BoundKind::Hoeffding => {
            let noise = noise.ok_or(BoundError::MissingConstant("hoeffding noise control"))?;
            hoeffding_envelope(bc, setup, form, noise)
        }
        BoundKind::MZ | BoundKind::VBEMoment => unreachable!("not a tail form"),
    }
}
