//! Envelopes and moment bounds for a concrete chain model.

use serde::{Deserialize, Serialize};

use crate::chains::{derive_constants, hoeffding_noise, ChainModel, FunctionalSpec};
use crate::coefficients::{
    compute_K, constants_bernstein, constants_fuk_nagaev, constants_hoeffding, constants_mcdiarmid, constants_mz,
    constants_semiexp, constants_vbe, constants_vbe_moment, constants_weak, BoundKind, CoefficientTable,
    MomentConstants,
};
use crate::envelopes::{envelope, BoundEnvelope, EnvelopeSetup, Form, HoeffdingNoise};
use crate::error::{invalid, BoundError, Result};
use crate::moments::{mz_moment_bound, vbe_moment_bound};
use crate::norms::NormIndex;

pub const ALL_FORMS: [Form; 12] = [
    Form::BernsteinRefined,
    Form::BernsteinRelaxed,
    Form::SemiExp,
    Form::FukNagaev,
    Form::Vbe,
    Form::Weak,
    Form::McDiarmidRio,
    Form::McDiarmidPower,
    Form::McDiarmidGaussian,
    Form::Hoeffding,
    Form::HoeffdingBennett,
    Form::HoeffdingBernstein,
];

/// One envelope to build: a form plus its moment order when it has one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeRequest {
    pub form: Form,
    #[serde(default)]
    pub q: Option<f64>,
}

impl EnvelopeRequest {
    pub fn new(form: Form) -> Self {
        EnvelopeRequest { form, q: None }
    }

    pub fn with_q(form: Form, q: f64) -> Self {
        EnvelopeRequest { form, q: Some(q) }
    }

    pub fn needs_q(form: Form) -> bool {
        matches!(form, Form::SemiExp | Form::FukNagaev | Form::Vbe | Form::Weak)
    }

    pub fn label(&self) -> String {
        match self.q {
            Some(q) => format!("{}_q{q}", self.form.tag()),
            None => self.form.tag().to_string(),
        }
    }

    /// Inverse of [`label`](Self::label): `bernstein_refined`, `fuk_nagaev_q4`, …
    pub fn parse(label: &str) -> Result<Self> {
        let bad = || invalid("form", format!("unknown envelope label `{label}`"));
        if let Some(form) = ALL_FORMS.iter().find(|f| f.tag() == label) {
            return if Self::needs_q(*form) {
                Err(invalid("form", format!("`{label}` needs an order suffix such as `{label}_q2`")))
            } else {
                Ok(Self::new(*form))
            };
        }
        let (head, q) = label.rsplit_once("_q").ok_or_else(bad)?;
        let form = *ALL_FORMS.iter().find(|f| f.tag() == head).ok_or_else(bad)?;
        if !Self::needs_q(form) {
            return Err(bad());
        }
        let q: f64 = q.parse().map_err(|_| bad())?;
        Ok(Self::with_q(form, q))
    }
}

/// Every tail form: Bernstein (both forms), Fuk–Nagaev `q ∈ {2, 4}`,
/// von Bahr–Esseen `q ∈ {1.5, 2}`, weak moment `q = 1.5`, semi-exponential
/// `q = 0.5`, McDiarmid (three forms) and Hoeffding (three forms).
pub fn all_requests() -> Vec<EnvelopeRequest> {
    use Form::*;
    let mut v = vec![EnvelopeRequest::new(BernsteinRefined), EnvelopeRequest::new(BernsteinRelaxed)];
    v.push(EnvelopeRequest::with_q(SemiExp, 0.5));
    for q in [2.0, 4.0] {
        v.push(EnvelopeRequest::with_q(FukNagaev, q));
    }
    for q in [1.5, 2.0] {
        v.push(EnvelopeRequest::with_q(Vbe, q));
    }
    v.push(EnvelopeRequest::with_q(Weak, 1.5));
    for f in [McDiarmidRio, McDiarmidPower, McDiarmidGaussian, Hoeffding, HoeffdingBennett, HoeffdingBernstein] {
        v.push(EnvelopeRequest::new(f));
    }
    v
}

/// Builds the envelope for `‖f(X₁, …, X_n) − E f‖_p`.
pub fn build_envelope(
    model: &ChainModel,
    f: &FunctionalSpec,
    n: usize,
    req: EnvelopeRequest,
) -> Result<BoundEnvelope> {
    let table = compute_K(model.schedule(), n)?;
    let mc = derive_constants(model, req_order(req)?)?;
    let noise = (req.form.kind() == BoundKind::Hoeffding).then(|| hoeffding_noise(model));
    envelope_from_constants(&table, &mc, f.out_dim(model), model.p(), req, noise)
}

fn req_order(req: EnvelopeRequest) -> Result<Option<f64>> {
    match (EnvelopeRequest::needs_q(req.form), req.q) {
        (true, None) => Err(invalid("q", format!("{} needs a moment order", req.form))),
        (true, q) => Ok(q),
        (false, _) => Ok(None),
    }
}

/// Builds an envelope from a coefficient table and given moment constants.
/// The Hoeffding forms fall back to `G_ε ≤ T` when `noise` is `None` and
/// `mc.g_sup` is set.
pub fn envelope_from_constants(
    table: &CoefficientTable,
    mc: &MomentConstants,
    d: usize,
    p: NormIndex,
    req: EnvelopeRequest,
    noise: Option<HoeffdingNoise>,
) -> Result<BoundEnvelope> {
    let q = req_order(req)?;
    if let (Some(q), Some(mq)) = (q, mc.q) {
        if (q - mq).abs() > 1e-12 {
            return Err(invalid("q", format!("constants are given at order {mq}, requested {q}")));
        }
    }
    let bc = match req.form.kind() {
        BoundKind::Bernstein => constants_bernstein(table, mc)?,
        BoundKind::SemiExp => constants_semiexp(table, mc, q.unwrap())?,
        BoundKind::FukNagaev => constants_fuk_nagaev(table, mc, q.unwrap())?,
        BoundKind::VBE => constants_vbe(table, mc, q.unwrap())?,
        BoundKind::WeakMoment => constants_weak(table, mc, q.unwrap())?,
        BoundKind::McDiarmid => constants_mcdiarmid(table, mc)?,
        BoundKind::Hoeffding => constants_hoeffding(table, mc)?,
        BoundKind::MZ | BoundKind::VBEMoment => unreachable!("not a tail form"),
    };
    let setup = EnvelopeSetup {
        n: table.n,
        d,
        p,
        k1n: table.k1n(),
        init: mc.init_tail,
    };
    let noise = match (req.form.kind(), noise) {
        (BoundKind::Hoeffding, None) => Some(HoeffdingNoise::Bounded(
            mc.g_sup.ok_or(BoundError::MissingConstant("g_sup"))?,
        )),
        (_, n) => n,
    };
    envelope(req.form, &bc, setup, noise)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentKind {
    /// `d^{1/q} √T_n(q)`, `q ≥ 2`.
    Mz,
    /// `(d V_n(q))^{1/q}`, `q ∈ [1, 2]`.
    Vbe,
}

impl MomentKind {
    pub fn tag(self) -> &'static str {
        match self {
            MomentKind::Mz => "mz",
            MomentKind::Vbe => "vbe_moment",
        }
    }
}

/// Bound on `E‖S_n‖_q` for the centred sum of states.
pub fn moment_bound(model: &ChainModel, n: usize, kind: MomentKind, q: f64) -> Result<f64> {
    let table = compute_K(model.schedule(), n)?;
    let mc = derive_constants(model, Some(q))?;
    match kind {
        MomentKind::Mz => mz_moment_bound(constants_mz(&table, &mc, q)?.tq, model.d(), q),
        MomentKind::Vbe => vbe_moment_bound(constants_vbe_moment(&table, &mc, q)?.vq, model.d(), q),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::{make_model, ExampleSpec, InitLaw, ModelSpec, NoiseSpec};
    use crate::envelopes::TailBound;

    fn ar(noise: NoiseSpec) -> ChainModel {
        make_model(ModelSpec {
            example: ExampleSpec::FunctionalAr {
                r: vec![vec![0.5]],
                b: vec![0.0],
            },
            noise,
            init: InitLaw::Point { x: vec![0.0] },
            p: 2.0,
        })
        .unwrap()
    }

    #[test]
    fn bounded_noise_builds_every_form() {
        let m = ar(NoiseSpec::TwoAtom { a: -1.0, b: 1.0, pr: 0.5 });
        for req in all_requests() {
            let r = build_envelope(&m, &FunctionalSpec::SumOfStates, 12, req);
            match req.form {
                // V_n < 1 is possible for the semi-exponential form.
                Form::SemiExp => {}
                _ => {
                    let e = r.unwrap_or_else(|e| panic!("{}: {e}", req.label()));
                    assert_eq!(e.label(), req.label());
                    assert!(e.eval(0.0) <= 1.0);
                }
            }
        }
    }

    #[test]
    fn gaussian_noise_rejects_mcdiarmid() {
        let m = ar(NoiseSpec::Gaussian { sigma: 1.0, d: 1 });
        let r = build_envelope(&m, &FunctionalSpec::SumOfStates, 12, EnvelopeRequest::new(Form::McDiarmidRio));
        assert!(r.is_err());
        assert!(build_envelope(&m, &FunctionalSpec::SumOfStates, 12, EnvelopeRequest::new(Form::Hoeffding)).is_ok());
    }

    #[test]
    fn missing_order_is_rejected() {
        let m = ar(NoiseSpec::UniformPm1 { d: 1 });
        assert!(build_envelope(&m, &FunctionalSpec::SumOfStates, 12, EnvelopeRequest::new(Form::FukNagaev)).is_err());
    }

    #[test]
    fn labels_round_trip() {
        for req in all_requests() {
            assert_eq!(EnvelopeRequest::parse(&req.label()).unwrap(), req);
        }
        assert!(EnvelopeRequest::parse("fuk_nagaev").is_err());
        assert!(EnvelopeRequest::parse("bernstein_refined_q2").is_err());
        assert!(EnvelopeRequest::parse("nope").is_err());
    }

    #[test]
    fn given_constants_match_derived_ones() {
        let m = ar(NoiseSpec::TwoAtom { a: -1.0, b: 1.0, pr: 0.5 });
        let table = compute_K(m.schedule(), 12).unwrap();
        let mc = derive_constants(&m, None).unwrap();
        for form in [Form::BernsteinRefined, Form::McDiarmidRio, Form::Hoeffding] {
            let req = EnvelopeRequest::new(form);
            let a = build_envelope(&m, &FunctionalSpec::SumOfStates, 12, req).unwrap();
            let b = envelope_from_constants(&table, &mc, 1, m.p(), req, None).unwrap();
            for u in [0.5, 2.0, 5.0] {
                assert_eq!(a.eval(u), b.eval(u), "{form}");
            }
        }
    }

    #[test]
    fn moment_bound_orders() {
        let m = ar(NoiseSpec::UniformPm1 { d: 1 });
        let b2 = moment_bound(&m, 50, MomentKind::Mz, 2.0).unwrap();
        let b4 = moment_bound(&m, 50, MomentKind::Mz, 4.0).unwrap();
        assert!(b2 > 0.0 && b4 > 0.0);
        assert!(moment_bound(&m, 50, MomentKind::Mz, 1.5).is_err());
        assert!(moment_bound(&m, 50, MomentKind::Vbe, 1.0).unwrap() > 0.0);
    }
}
