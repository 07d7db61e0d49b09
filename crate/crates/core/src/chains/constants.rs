//! Moment constants of `G_ε(ε)` for the built-in noise laws.
//!
//! Scalar laws are handled exactly (finite laws) or by quadrature (Gaussian,
//! uniform). For `d > 1` with a continuous law, `G_ε(y) ≤ ‖y − c‖_p + m̄`
//! where `c` is the centre of the law and `m̄ ≥ E‖ε − c‖_p`; moments of that
//! dominating variable are Monte-Carlo estimates inflated by three standard
//! errors, and the result is flagged as estimated.

use std::sync::Arc;

use statrs::function::erf::erfc;

use super::model::{ChainModel, InitLaw};
use super::noise::{gaussian_g, pm1_g, uniform_g, NoiseSpec};
use crate::coefficients::MomentConstants;
use crate::envelopes::HoeffdingNoise;
use crate::error::{BoundError, Result};
use crate::norms::NormIndex;
use crate::rng::stream;

const QUAD_INFLATE: f64 = 1.0 + 1e-9;
const MC_DRAWS: usize = 1_000_000;
const MC_SEED: u64 = 0x006d_6f6d_656e_7473;

/// Composite Simpson rule on `[a, b]` with `m` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// `E[φ(G(ε))]` for scalar `N(0, σ²)` noise.
fn gaussian_expect(sigma: f64, phi: impl Fn(f64) -> f64) -> f64 {
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    QUAD_INFLATE
        * simpson(
            |z| phi(gaussian_g(sigma * z, sigma)) * norm * (-0.5 * z * z).exp(),
            -12.0,
            12.0,
            4800,
        )
}

fn uniform_expect(lo: f64, hi: f64, phi: impl Fn(f64) -> f64) -> f64 {
    QUAD_INFLATE * simpson(|y| phi(uniform_g(y, lo, hi)), lo, hi, 4000) / (hi - lo)
}

/// Mean plus three standard errors of `φ(‖ε − c‖_p + m̄)`.
fn mc_expect(noise: &NoiseSpec, p: NormIndex, phi: impl Fn(f64) -> f64) -> f64 {
    let d = noise.dim();
    let c = noise.mean();
    let mbar = noise.mean_norm_bound(p);
    let mut rng = stream(MC_SEED, 0);
    let mut e = vec![0.0; d];
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..MC_DRAWS {
        noise.sample_into(&mut rng, &mut e);
        e.iter_mut().for_each(|v| *v -= c);
        let v = phi(p.norm(&e) + mbar);
        s += v;
        s2 += v * v;
    }
    let n = MC_DRAWS as f64;
    let m = s / n;
    m + 3.0 * ((s2 / n - m * m).max(0.0) / n).sqrt()
}

/// How the moments of `G_ε(ε)` are obtained for a model.
enum GLaw {
    /// Finite law of `G` values with probabilities.
    Finite(Vec<(f64, f64)>),
    GaussianScalar(f64),
    UniformScalar(f64, f64),
    /// Continuous `d > 1` law through the dominating variable.
    Dominated(NoiseSpec, NormIndex),
}

impl GLaw {
    fn of(model: &ChainModel) -> GLaw {
        let noise = *model.noise();
        let p = model.p();
        if let super::model::ExampleSpec::Subsampled { .. } = model.spec().example {
            return GLaw::Finite(vec![(noise.diameter(p), 1.0)]);
        }
        match noise {
            NoiseSpec::TwoAtom { a, b, pr } => {
                let gap = (a - b).abs();
                GLaw::Finite(vec![((1.0 - pr) * gap, pr), (pr * gap, 1.0 - pr)])
            }
            NoiseSpec::UniformPm1 { d } => GLaw::Finite(vec![(pm1_g(d, p), 1.0)]),
            NoiseSpec::Zero { .. } => GLaw::Finite(vec![(0.0, 1.0)]),
            NoiseSpec::Gaussian { sigma, d: 1 } => GLaw::GaussianScalar(sigma),
            NoiseSpec::BoundedUniform { lo, hi, d: 1 } => GLaw::UniformScalar(lo, hi),
            other => GLaw::Dominated(other, p),
        }
    }

    fn expect(&self, phi: impl Fn(f64) -> f64) -> f64 {
        match self {
            GLaw::Finite(atoms) => atoms.iter().map(|(g, w)| w * phi(*g)).sum(),
            GLaw::GaussianScalar(s) => gaussian_expect(*s, phi),
            GLaw::UniformScalar(lo, hi) => uniform_expect(*lo, *hi, phi),
            GLaw::Dominated(noise, p) => mc_expect(noise, *p, phi),
        }
    }

    fn estimated(&self) -> bool {
        matches!(self, GLaw::Dominated(..))
    }

    fn sup(&self) -> Option<f64> {
        match self {
            GLaw::Finite(atoms) => Some(atoms.iter().map(|a| a.0).fold(0.0, f64::max)),
            GLaw::GaussianScalar(_) => None,
            GLaw::UniformScalar(lo, hi) => Some(0.5 * (hi - lo)),
            GLaw::Dominated(noise, p) => noise.is_bounded().then(|| noise.diameter(*p)),
        }
    }
}

/// `ess sup G_ε(ε)` when finite.
pub fn g_sup(model: &ChainModel) -> Option<f64> {
    GLaw::of(model).sup()
}

/// `E[G_ε(ε)^q]`.
pub fn g_moment(model: &ChainModel, q: f64) -> f64 {
    GLaw::of(model).expect(|g| g.powf(q))
}

/// Fills every constant that applies to the model. Order-dependent moments
/// are computed at `q`; the semi-exponential pair needs `q ∈ (0, 1)`.
pub fn derive_constants(model: &ChainModel, q: Option<f64>) -> Result<MomentConstants> {
    let law = GLaw::of(model);
    let noise = *model.noise();
    let p = model.p();
    let sup = law.sup();
    let second = law.expect(|g| g * g);
    let (bern_h, bern_a) = match (sup, noise) {
        (Some(t), _) => (t, second),
        (None, NoiseSpec::Gaussian { sigma, d }) => {
            // d^{(p+1)/p}
            let scale = d as f64 * p.dim_factor(d);
            (2.0 * sigma * scale, 4.0 * sigma * sigma * scale * scale)
        }
        (None, _) => unreachable!("only Gaussian noise is unbounded"),
    };
    let mut mc = MomentConstants {
        bern_h: Some(bern_h),
        bern_a: Some(bern_a),
        second_moment: Some(second),
        t1: noise.is_bounded().then(|| noise.diameter(p)),
        g_sup: sup,
        q,
        init_tail: model.init_tail(),
        estimated: law.estimated(),
        ..Default::default()
    };
    if let Some(q) = q {
        if !(q > 0.0 && q.is_finite()) {
            return Err(BoundError::OrderOutOfRange { q, range: "(0, inf)" });
        }
        mc.noise_q_moment = Some(law.expect(|g| g.powf(q)));
        mc.init_q_moment = match &model.spec().init {
            InitLaw::Point { .. } => None,
            InitLaw::UniformBox { half_width, .. } => {
                Some((2.0 * half_width * p.dim_factor(model.d())).powf(q))
            }
        };
        if q < 1.0 {
            mc.semi_eexp = Some(law.expect(|g| g.powf(q).exp()));
            mc.semi_a = Some(law.expect(|g| g * g * g.powf(q).exp()));
        }
    }
    Ok(mc)
}

/// Control of `max_k G_ε(ε_k)` for the Hoeffding envelopes: the bound `T`
/// for bounded noise, the exact single-draw tail otherwise.
pub fn hoeffding_noise(model: &ChainModel) -> HoeffdingNoise {
    if let Some(t) = g_sup(model) {
        return HoeffdingNoise::Bounded(t);
    }
    let p = model.p();
    match *model.noise() {
        NoiseSpec::Gaussian { sigma, d: 1 } => HoeffdingNoise::General(Arc::new(move |y| gaussian_g_tail(y, sigma))),
        NoiseSpec::Gaussian { sigma, d } => {
            let mbar = model.noise().mean_norm_bound(p);
            let spread = sigma * p.dim_factor(d);
            // ‖ε‖_p ≤ d^{1/p} max_i |ε_i| and a union bound over coordinates.
            HoeffdingNoise::General(Arc::new(move |y| {
                if y <= mbar {
                    1.0
                } else {
                    (d as f64 * erfc((y - mbar) / (spread * std::f64::consts::SQRT_2))).min(1.0)
                }
            }))
        }
        _ => unreachable!("bounded laws handled above"),
    }
}

/// `P(G(ε) > y)` for scalar `N(0, σ²)` noise. `G` is even and increasing in
/// `|ε|`, so this is `P(|ε| > t)` with `G(t) = y`.
pub fn gaussian_g_tail(y: f64, sigma: f64) -> f64 {
    if y <= gaussian_g(0.0, sigma) {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0, y + 10.0 * sigma);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gaussian_g(mid, sigma) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // `lo` under-estimates t, so the tail is rounded up.
    erfc(lo / (sigma * std::f64::consts::SQRT_2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::model::{make_model, ExampleSpec, ModelSpec};

    fn model(noise: NoiseSpec, init: InitLaw) -> ChainModel {
        let d = noise.dim();
        let r: Vec<Vec<f64>> = (0..d)
            .map(|i| (0..d).map(|j| if i == j { 0.5 } else { 0.0 }).collect())
            .collect();
        make_model(ModelSpec {
            example: ExampleSpec::FunctionalAr { r, b: vec![0.0; d] },
            noise,
            init,
            p: 2.0,
        })
        .unwrap()
    }

    fn point(d: usize) -> InitLaw {
        InitLaw::Point { x: vec![0.0; d] }
    }

    #[test]
    fn two_atom_moments_are_exact() {
        let m = model(NoiseSpec::TwoAtom { a: -1.0, b: 1.0, pr: 0.5 }, point(1));
        let mc = derive_constants(&m, Some(3.0)).unwrap();
        assert_eq!(mc.second_moment, Some(1.0));
        assert_eq!(mc.noise_q_moment, Some(1.0));
        assert_eq!(mc.g_sup, Some(1.0));
        assert_eq!(mc.t1, Some(2.0));
        assert!(!mc.estimated);
        assert_eq!(mc.init_q_moment, None);
    }

    #[test]
    fn gaussian_second_moment_by_quadrature() {
        let m = model(NoiseSpec::Gaussian { sigma: 1.3, d: 1 }, point(1));
        let mc = derive_constants(&m, Some(2.5)).unwrap();
        let mut rng = stream(5, 0);
        let spec = NoiseSpec::Gaussian { sigma: 1.3, d: 1 };
        let n = 400_000;
        let mut e = [0.0];
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            spec.sample_into(&mut rng, &mut e);
            let g = gaussian_g(e[0], 1.3).powi(2);
            s += g;
            s2 += g * g;
        }
        let mean = s / n as f64;
        let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mc.second_moment.unwrap() - mean).abs() < 4.0 * se);
        assert!(mc.semi_a.is_none());
    }

    #[test]
    fn gaussian_bernstein_constants_hold() {
        let sigma = 0.7;
        let m = model(NoiseSpec::Gaussian { sigma, d: 1 }, point(1));
        let mc = derive_constants(&m, None).unwrap();
        let (h, a) = (mc.bern_h.unwrap(), mc.bern_a.unwrap());
        assert!((h - 2.0 * sigma).abs() < 1e-15 && (a - 4.0 * sigma * sigma).abs() < 1e-15);
        let mut fact = 1.0;
        for k in 2..=14 {
            fact *= k as f64;
            let moment = g_moment(&m, k as f64);
            assert!(moment <= fact / 2.0 * h.powi(k - 2) * a, "k = {k}");
        }
    }

    #[test]
    fn uniform_scalar_moments() {
        // G(y) = (y² + 1)/2 on [−1, 1]: E G² = E[(y² + 1)²]/4 = (1/5 + 2/3 + 1)/4.
        let m = model(NoiseSpec::BoundedUniform { lo: -1.0, hi: 1.0, d: 1 }, point(1));
        let mc = derive_constants(&m, None).unwrap();
        let exact = (0.2 + 2.0 / 3.0 + 1.0) / 4.0;
        assert!((mc.second_moment.unwrap() - exact).abs() < 1e-8);
        assert_eq!(mc.g_sup, Some(1.0));
    }

    #[test]
    fn dominated_moments_are_flagged() {
        let m = model(NoiseSpec::Gaussian { sigma: 1.0, d: 2 }, point(2));
        let mc = derive_constants(&m, Some(2.0)).unwrap();
        assert!(mc.estimated);
        // Ĝ = ‖ε‖₂ + √2 with ‖ε‖₂ Rayleigh: E Ĝ² = 2 + 2√2·√(π/2) + 2.
        let exact = 4.0 + 2.0 * 2f64.sqrt() * (std::f64::consts::PI / 2.0).sqrt();
        let got = mc.second_moment.unwrap();
        assert!(got >= exact - 1e-3 && got < exact + 0.05, "{got} vs {exact}");
    }

    #[test]
    fn semiexp_pair_for_small_q() {
        let m = model(NoiseSpec::TwoAtom { a: 0.0, b: 2.0, pr: 0.25 }, point(1));
        let mc = derive_constants(&m, Some(0.5)).unwrap();
        // G values 1.5 (w .25) and 0.5 (w .75).
        let e = 0.25 * 1.5f64.sqrt().exp() + 0.75 * 0.5f64.sqrt().exp();
        assert!((mc.semi_eexp.unwrap() - e).abs() < 1e-14);
    }

    #[test]
    fn uniform_box_init_moment() {
        let m = model(
            NoiseSpec::TwoAtom { a: -1.0, b: 1.0, pr: 0.5 },
            InitLaw::UniformBox {
                center: vec![0.0],
                half_width: 0.5,
            },
        );
        let mc = derive_constants(&m, Some(2.0)).unwrap();
        assert_eq!(mc.init_q_moment, Some(1.0));
    }

    #[test]
    fn gaussian_tail_inverts_g() {
        assert_eq!(gaussian_g_tail(0.1, 1.0), 1.0);
        let t = 1.7;
        let y = gaussian_g(t, 1.0);
        let p = gaussian_g_tail(y, 1.0);
        assert!((p - erfc(t / std::f64::consts::SQRT_2)).abs() < 1e-10);
    }
}
