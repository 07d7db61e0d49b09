//! Concrete chain models on `ℝ^d` with `d(x, x′) = ‖x − x′‖_p`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::noise::NoiseSpec;
use crate::envelopes::InitialTailSpec;
use crate::error::{invalid, BoundError, Result};
use crate::norms::NormIndex;
use crate::rng::stream;
use crate::schedules::{CustomSequences, PowerLaw, Regime, RhoLaw, Schedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitRootVariant {
    /// `X_n = X_{n−1}/(1 + c/n^α) + ε_n`.
    InverseOnePlus,
    /// `X_n = (1 − c/n^α) X_{n−1} + ε_n`.
    OneMinus,
}

/// Model parameters. Matrices are given row by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExampleSpec {
    /// `X_n = R X_{n−1} + b + ε_n` with `‖R‖_p < 1`.
    FunctionalAr { r: Vec<Vec<f64>>, b: Vec<f64> },
    /// Scalar auto-regression with a unit root.
    UnitRoot {
        c: f64,
        alpha: f64,
        variant: UnitRootVariant,
    },
    /// `X_n = X_{n−1} − c_n(A X_{n−1} − B + ε_n)`, `c_n = γ/n^α`.
    LinearSa {
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        gamma: f64,
        alpha: f64,
    },
    /// As [`ExampleSpec::LinearSa`] with projections on the Euclidean ball of
    /// radius `radius` (`p = 2` only).
    ProjectedLinearSa {
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        gamma: f64,
        alpha: f64,
        radius: f64,
    },
    /// `X_n = (I − γA) X_{n−1} + γB − (γ/n^α) ε_n`.
    LinearSaScaledNoise {
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        gamma: f64,
        alpha: f64,
    },
    /// `X_n = (I − c_n A) X_{n−1} + c_n B − γ ε_n`.
    LinearSaAdditive {
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        gamma: f64,
        alpha: f64,
    },
    /// Projected SGD with Langevin perturbation on
    /// `L(x) = Σ_i (h_i/2)‖x − c_i‖₂²`, minibatches of size `batch`
    /// (`p = 2` only).
    ProjectedSgd {
        curvatures: Vec<f64>,
        centers: Vec<Vec<f64>>,
        batch: usize,
        gamma: f64,
        alpha: f64,
        radius: f64,
    },
    /// The affine chain `x ↦ R x + b + ε` observed after `gaps[i]` steps for
    /// the transition into index `n = i + 2`.
    Subsampled {
        r: Vec<Vec<f64>>,
        b: Vec<f64>,
        gaps: Vec<usize>,
    },
}

impl ExampleSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ExampleSpec::FunctionalAr { .. } => "functional_ar",
            ExampleSpec::UnitRoot { .. } => "unit_root",
            ExampleSpec::LinearSa { .. } => "linear_sa",
            ExampleSpec::ProjectedLinearSa { .. } => "projected_linear_sa",
            ExampleSpec::LinearSaScaledNoise { .. } => "linear_sa_scaled_noise",
            ExampleSpec::LinearSaAdditive { .. } => "linear_sa_additive",
            ExampleSpec::ProjectedSgd { .. } => "projected_sgd",
            ExampleSpec::Subsampled { .. } => "subsampled",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitLaw {
    Point { x: Vec<f64> },
    /// Independent uniform coordinates on `center ± half_width`.
    UniformBox { center: Vec<f64>, half_width: f64 },
}

impl InitLaw {
    fn dim(&self) -> usize {
        match self {
            InitLaw::Point { x } => x.len(),
            InitLaw::UniformBox { center, .. } => center.len(),
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        match self {
            InitLaw::Point { x } => x.clone(),
            InitLaw::UniformBox { center, .. } => center.clone(),
        }
    }
}

fn default_p() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub example: ExampleSpec,
    pub noise: NoiseSpec,
    pub init: InitLaw,
    #[serde(default = "default_p")]
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SaVariant {
    Decreasing,
    ScaledNoise,
    Additive,
}

#[derive(Debug, Clone)]
enum Dynamics {
    Affine {
        m: Vec<f64>,
        b: Vec<f64>,
    },
    UnitRoot {
        c: f64,
        alpha: f64,
        variant: UnitRootVariant,
    },
    LinearSa {
        a: Vec<f64>,
        b: Vec<f64>,
        gamma: f64,
        alpha: f64,
        variant: SaVariant,
        radius: Option<f64>,
    },
    Sgd {
        h: Vec<f64>,
        centers: Vec<f64>,
        batch: usize,
        gamma: f64,
        alpha: f64,
        radius: f64,
    },
    Subsampled {
        m: Vec<f64>,
        b: Vec<f64>,
        gaps: Vec<usize>,
    },
}

/// Randomness consumed by one transition: the noise draws (`d` values per
/// draw) and, for SGD, the minibatch indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Innovation {
    pub noise: Vec<f64>,
    pub batch: Vec<usize>,
}

/// `X_n = M_n X_{n−1} + b_n + s_n ε_n` for linear models.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineStep {
    /// Row-major `d × d`.
    pub m: Vec<f64>,
    pub b: Vec<f64>,
    pub noise_coef: f64,
}

/// States `X_1..X_n`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub d: usize,
    pub states: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// `X_k` for `1 ≤ k ≤ len`.
    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[(k - 1) * self.d..k * self.d]
    }
}

#[derive(Debug, Clone)]
pub struct ChainModel {
    spec: ModelSpec,
    d: usize,
    p: NormIndex,
    dynamics: Dynamics,
    schedule: Schedule,
    spectrum: Option<(f64, f64)>,
}

fn flatten(rows: &[Vec<f64>], name: &'static str) -> Result<(usize, Vec<f64>)> {
    let d = rows.len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(invalid(name, "must be a nonempty square matrix"));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(invalid(name, "entries must be finite"));
    }
    Ok((d, flat))
}

fn is_diagonal(m: &[f64], d: usize) -> bool {
    (0..d).all(|i| (0..d).all(|j| i == j || m[i * d + j] == 0.0))
}

fn matvec(m: &[f64], d: usize, x: &[f64], out: &mut [f64]) {
    for i in 0..d {
        let row = &m[i * d..(i + 1) * d];
        out[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
    }
}

/// Operator norm `‖R‖_{p→p}`; exact for `p ∈ {1, 2, ∞}` and for diagonal
/// matrices, the Riesz–Thorin bound `‖R‖_1^{1/p} ‖R‖_∞^{1−1/p}` otherwise.
pub fn operator_norm(m: &[f64], d: usize, p: NormIndex) -> f64 {
    if is_diagonal(m, d) {
        return (0..d).map(|i| m[i * d + i].abs()).fold(0.0, f64::max);
    }
    let col = (0..d)
        .map(|j| (0..d).map(|i| m[i * d + j].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let row = (0..d)
        .map(|i| m[i * d..(i + 1) * d].iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let pv = p.value();
    if pv == 1.0 {
        col
    } else if p.is_inf() {
        row
    } else if pv == 2.0 {
        DMatrix::from_row_slice(d, d, m).singular_values().max()
    } else {
        col.powf(1.0 / pv) * row.powf(1.0 - 1.0 / pv)
    }
}

/// `(λ_min, λ_max)` of `A`: the diagonal for diagonal `A` (any `p`), the
/// symmetric eigenvalues for `p = 2`.
fn spectrum(a: &[f64], d: usize, p: NormIndex) -> Result<(f64, f64)> {
    let (lo, hi) = if is_diagonal(a, d) {
        let diag: Vec<f64> = (0..d).map(|i| a[i * d + i]).collect();
        (
            diag.iter().copied().fold(f64::INFINITY, f64::min),
            diag.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    } else {
        if p.value() != 2.0 {
            return Err(invalid(
                "a",
                "non-diagonal A is supported for p = 2 only (contraction factor from the symmetric spectrum)",
            ));
        }
        let sym = (0..d).all(|i| (0..d).all(|j| (a[i * d + j] - a[j * d + i]).abs() <= 1e-12));
        if !sym {
            return Err(invalid("a", "A must be symmetric"));
        }
        let eig = SymmetricEigen::new(DMatrix::from_row_slice(d, d, a));
        (eig.eigenvalues.min(), eig.eigenvalues.max())
    };
    if !(lo > 0.0) {
        return Err(invalid("a", format!("A must be positive definite, lambda_min = {lo}")));
    }
    Ok((lo, hi))
}

fn project(v: &mut [f64], radius: f64) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > radius {
        let s = radius / norm;
        v.iter_mut().for_each(|x| *x *= s);
    }
}

fn positive(v: f64, name: &'static str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be positive, got {v}")))
    }
}

fn check_len(v: &[f64], d: usize, name: &'static str) -> Result<()> {
    if v.len() != d || v.iter().any(|x| !x.is_finite()) {
        Err(invalid(name, format!("needs {d} finite entries")))
    } else {
        Ok(())
    }
}

/// Builds a model, its implied schedule and regime classification.
pub fn make_model(spec: ModelSpec) -> Result<ChainModel> {
    let p = NormIndex::new(spec.p)?;
    spec.noise.validate()?;
    let (d, dynamics, schedule, spectrum_ab) = match &spec.example {
        ExampleSpec::FunctionalAr { r, b } => {
            let (d, m) = flatten(r, "r")?;
            check_len(b, d, "b")?;
            let rho = operator_norm(&m, d, p);
            if rho >= 1.0 {
                return Err(invalid("r", format!("needs ||R||_p < 1, got {rho}")));
            }
            let s = Schedule::from_laws(RhoLaw::Constant(rho), PowerLaw::constant(1.0), PowerLaw::ZERO)?
                .classify_tightest(Regime::C15, 0.0)?;
            (d, Dynamics::Affine { m, b: b.clone() }, s, None)
        }
        ExampleSpec::UnitRoot { c, alpha, variant } => {
            let (c, alpha) = (*c, *alpha);
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(invalid("alpha", format!("unit root needs alpha in (0, 1), got {alpha}")));
            }
            let law = match variant {
                UnitRootVariant::InverseOnePlus => {
                    positive(c, "c")?;
                    RhoLaw::InverseOnePlusPower { c, alpha }
                }
                UnitRootVariant::OneMinus => {
                    if !(c > 0.0 && c < 1.0) {
                        return Err(invalid("c", format!("needs c in (0, 1), got {c}")));
                    }
                    RhoLaw::OneMinusPower { c, c_max: c, alpha }
                }
            };
            let s = Schedule::from_laws(law, PowerLaw::constant(1.0), PowerLaw::ZERO)?
                .classify_tightest(Regime::C16, alpha)?;
            (
                1,
                Dynamics::UnitRoot {
                    c,
                    alpha,
                    variant: *variant,
                },
                s,
                None,
            )
        }
        ExampleSpec::LinearSa { a, b, gamma, alpha }
        | ExampleSpec::ProjectedLinearSa {
            a, b, gamma, alpha, ..
        }
        | ExampleSpec::LinearSaScaledNoise { a, b, gamma, alpha }
        | ExampleSpec::LinearSaAdditive { a, b, gamma, alpha } => {
            let (gamma, alpha) = (*gamma, *alpha);
            let (d, am) = flatten(a, "a")?;
            check_len(b, d, "b")?;
            positive(gamma, "gamma")?;
            let (lmin, lmax) = spectrum(&am, d, p)?;
            let (variant, radius) = match &spec.example {
                ExampleSpec::LinearSa { .. } => (SaVariant::Decreasing, None),
                ExampleSpec::ProjectedLinearSa { radius, .. } => {
                    positive(*radius, "radius")?;
                    if p.value() != 2.0 {
                        return Err(invalid("p", "projected models need p = 2"));
                    }
                    (SaVariant::Decreasing, Some(*radius))
                }
                ExampleSpec::LinearSaScaledNoise { .. } => (SaVariant::ScaledNoise, None),
                _ => (SaVariant::Additive, None),
            };
            let (regime, alpha_ok, range) = match variant {
                SaVariant::Decreasing => (Regime::C15, (0.0..1.0).contains(&alpha), "[0, 1)"),
                SaVariant::ScaledNoise => (Regime::C17, alpha > 0.0 && alpha <= 1.0, "(0, 1]"),
                SaVariant::Additive => (Regime::C16, alpha > 0.0 && alpha < 1.0, "(0, 1)"),
            };
            if !alpha_ok {
                return Err(invalid("alpha", format!("{} needs alpha in {range}, got {alpha}", spec.example.name())));
            }
            if variant != SaVariant::Decreasing && !(gamma * lmin < 1.0) {
                return Err(invalid("gamma", format!("needs gamma*lambda_min in (0, 1), got {}", gamma * lmin)));
            }
            // Largest step: c_2 = γ/2^α, or γ for the constant-step variant.
            let c2 = match variant {
                SaVariant::ScaledNoise => gamma,
                _ => gamma / 2f64.powf(alpha),
            };
            if !(c2 * lmax < 2.0 && (1.0 - c2 * lmin).abs() < 1.0) {
                return Err(invalid(
                    "gamma",
                    format!("step too large: |1 - c lambda| must be < 1 at c = {c2}"),
                ));
            }
            let (rho, tau, xi) = match variant {
                SaVariant::Decreasing => (
                    RhoLaw::OneMinusPower {
                        c: gamma * lmin,
                        c_max: gamma * lmax,
                        alpha,
                    },
                    PowerLaw { scale: gamma, exponent: alpha },
                    match radius {
                        Some(r) => PowerLaw {
                            scale: 2.0 * r * gamma * lmax,
                            exponent: alpha,
                        },
                        None => PowerLaw::ZERO,
                    },
                ),
                SaVariant::ScaledNoise => (
                    RhoLaw::Constant((1.0 - gamma * lmin).abs().max((1.0 - gamma * lmax).abs())),
                    PowerLaw { scale: gamma, exponent: alpha },
                    PowerLaw::ZERO,
                ),
                SaVariant::Additive => (
                    RhoLaw::OneMinusPower {
                        c: gamma * lmin,
                        c_max: gamma * lmax,
                        alpha,
                    },
                    PowerLaw::constant(gamma),
                    PowerLaw::ZERO,
                ),
            };
            let s = Schedule::from_laws(rho, tau, xi)?.classify_tightest(regime, alpha)?;
            (
                d,
                Dynamics::LinearSa {
                    a: am,
                    b: b.clone(),
                    gamma,
                    alpha,
                    variant,
                    radius,
                },
                s,
                Some((lmin, lmax)),
            )
        }
        ExampleSpec::ProjectedSgd {
            curvatures,
            centers,
            batch,
            gamma,
            alpha,
            radius,
        } => {
            let (gamma, alpha, radius, batch) = (*gamma, *alpha, *radius, *batch);
            if p.value() != 2.0 {
                return Err(invalid("p", "projected SGD needs p = 2"));
            }
            positive(gamma, "gamma")?;
            positive(radius, "radius")?;
            let n_comp = curvatures.len();
            if n_comp == 0 || centers.len() != n_comp {
                return Err(invalid("centers", "need one center per curvature, at least one component"));
            }
            if batch == 0 || batch > n_comp {
                return Err(invalid("batch", format!("needs 1 <= batch <= {n_comp}, got {batch}")));
            }
            let d = centers[0].len();
            let mut flat = Vec::with_capacity(n_comp * d);
            for c in centers {
                check_len(c, d, "centers")?;
                flat.extend_from_slice(c);
            }
            for &h in curvatures {
                positive(h, "curvatures")?;
            }
            if !(0.0..1.0).contains(&alpha) {
                return Err(invalid("alpha", format!("projected SGD needs alpha in [0, 1), got {alpha}")));
            }
            let m = curvatures.iter().copied().fold(f64::INFINITY, f64::min);
            let l = curvatures.iter().copied().fold(0.0, f64::max);
            if alpha == 0.0 {
                let g = 2.0 * m * gamma - l * l * gamma * gamma;
                if !(g > 0.0 && g < 1.0) {
                    return Err(invalid("gamma", format!("alpha = 0 needs 2 m gamma - l^2 gamma^2 in (0, 1), got {g}")));
                }
            } else if !(l * l * gamma / 2f64.powf(alpha) < 2.0 * m) {
                return Err(invalid("gamma", "needs l^2 gamma / 2^alpha < 2 m"));
            }
            let grad_bound = curvatures
                .iter()
                .zip(centers)
                .map(|(h, c)| h * (radius + c.iter().map(|v| v * v).sum::<f64>().sqrt()))
                .fold(0.0, f64::max);
            let s = Schedule::from_laws(
                RhoLaw::GradientStep {
                    m_gamma: m * gamma,
                    l_gamma: l * gamma,
                    alpha,
                },
                PowerLaw { scale: gamma, exponent: alpha },
                PowerLaw {
                    scale: 2.0 * grad_bound * gamma,
                    exponent: alpha,
                },
            )?
            .classify_tightest(Regime::C15, alpha)?;
            let in_ball = match &spec.init {
                InitLaw::Point { x } => x.iter().map(|v| v * v).sum::<f64>().sqrt() <= radius,
                InitLaw::UniformBox { center, half_width } => {
                    let far: f64 = center.iter().map(|c| (c.abs() + half_width).powi(2)).sum::<f64>().sqrt();
                    far <= radius
                }
            };
            if !in_ball {
                return Err(invalid("init", "the initial state must lie in the projection ball"));
            }
            (
                d,
                Dynamics::Sgd {
                    h: curvatures.clone(),
                    centers: flat,
                    batch,
                    gamma,
                    alpha,
                    radius,
                },
                s,
                Some((m, l)),
            )
        }
        ExampleSpec::Subsampled { r, b, gaps } => {
            let (d, m) = flatten(r, "r")?;
            check_len(b, d, "b")?;
            if gaps.is_empty() || gaps.contains(&0) {
                return Err(invalid("gaps", "need at least one gap, all positive"));
            }
            if !spec.noise.is_bounded() {
                return Err(invalid("noise", "subsampled chains need bounded noise"));
            }
            let rho = operator_norm(&m, d, p);
            if rho >= 1.0 {
                return Err(invalid("r", format!("needs ||R||_p < 1, got {rho}")));
            }
            let seqs = CustomSequences {
                rho: gaps.iter().map(|&k| rho.powi(k as i32)).collect(),
                tau: gaps
                    .iter()
                    .map(|&k| (0..k).map(|i| rho.powi(i as i32)).sum::<f64>())
                    .collect(),
                xi: vec![0.0; gaps.len()],
            };
            let s = Schedule::custom(seqs)?.classify_tightest(Regime::C15, 0.0)?;
            (
                d,
                Dynamics::Subsampled {
                    m,
                    b: b.clone(),
                    gaps: gaps.clone(),
                },
                s,
                None,
            )
        }
    };
    if spec.noise.dim() != d {
        return Err(invalid(
            "noise",
            format!("noise dimension {} does not match state dimension {d}", spec.noise.dim()),
        ));
    }
    if spec.init.dim() != d {
        return Err(invalid("init", format!("initial state needs dimension {d}")));
    }
    match &spec.init {
        InitLaw::Point { x } => check_len(x, d, "init.x")?,
        InitLaw::UniformBox { center, half_width } => {
            check_len(center, d, "init.center")?;
            positive(*half_width, "init.half_width")?;
        }
    }
    Ok(ChainModel {
        spec,
        d,
        p,
        dynamics,
        schedule,
        spectrum: spectrum_ab,
    })
}

impl ChainModel {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> NormIndex {
        self.p
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.spec.noise
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    /// `(λ_min, λ_max)` of `A` for linear SA models, `(m, ℓ)` for SGD.
    pub fn spectrum(&self) -> Option<(f64, f64)> {
        self.spectrum
    }

    /// Largest horizon the model can simulate.
    pub fn horizon_limit(&self) -> usize {
        match &self.dynamics {
            Dynamics::Subsampled { gaps, .. } => gaps.len() + 1,
            _ => usize::MAX,
        }
    }

    /// Noise draws consumed by the transition into `X_n`.
    pub fn draws_per_step(&self, n: usize) -> usize {
        match &self.dynamics {
            Dynamics::Subsampled { gaps, .. } => gaps[n - 2],
            _ => 1,
        }
    }

    /// True when every transition uses a single noise draw and nothing else,
    /// so noise atoms enumerate all paths.
    pub fn single_draw_noise(&self) -> bool {
        !matches!(self.dynamics, Dynamics::Subsampled { .. } | Dynamics::Sgd { .. })
    }

    pub fn init_is_deterministic(&self) -> bool {
        matches!(self.spec.init, InitLaw::Point { .. })
    }

    /// Tail hypothesis satisfied by `G_{X₁}(X₁)`.
    pub fn init_tail(&self) -> InitialTailSpec {
        match &self.spec.init {
            InitLaw::Point { .. } => InitialTailSpec::Deterministic,
            InitLaw::UniformBox { half_width, .. } => InitialTailSpec::BoundedDiameter {
                t0: 2.0 * half_width * self.p.dim_factor(self.d),
            },
        }
    }

    pub fn sample_init<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match &self.spec.init {
            InitLaw::Point { x } => out.copy_from_slice(x),
            InitLaw::UniformBox { center, half_width } => {
                for (o, c) in out.iter_mut().zip(center) {
                    *o = c + half_width * (2.0 * rng.random::<f64>() - 1.0);
                }
            }
        }
    }

    pub fn sample_innovation<R: Rng + ?Sized>(&self, n: usize, rng: &mut R, inn: &mut Innovation) {
        let draws = self.draws_per_step(n);
        inn.noise.resize(self.d * draws, 0.0);
        self.spec.noise.sample_into(rng, &mut inn.noise);
        if let Dynamics::Sgd { h, batch, .. } = &self.dynamics {
            inn.batch = rand::seq::index::sample(rng, h.len(), *batch).into_vec();
        }
    }

    /// `δ` between two innovations of step `n`: `‖u − u′‖_p` on the noise
    /// part (the minibatch is accounted for by `ξ_n`), and the sup over draws
    /// for subsampled chains.
    pub fn noise_distance(&self, a: &Innovation, b: &Innovation) -> f64 {
        a.noise
            .chunks(self.d)
            .zip(b.noise.chunks(self.d))
            .map(|(x, y)| self.p.distance(x, y))
            .fold(0.0, f64::max)
    }

    /// `X_n = F_n(x, innovation)`.
    pub fn step_into(&self, n: usize, x: &[f64], inn: &Innovation, out: &mut [f64]) -> Result<()> {
        if n < 2 {
            return Err(BoundError::HorizonTooSmall(n));
        }
        let d = self.d;
        let e = &inn.noise;
        match &self.dynamics {
            Dynamics::Affine { m, b } => {
                matvec(m, d, x, out);
                for i in 0..d {
                    out[i] += b[i] + e[i];
                }
            }
            Dynamics::UnitRoot { c, alpha, variant } => {
                let s = c / (n as f64).powf(*alpha);
                let r = match variant {
                    UnitRootVariant::InverseOnePlus => 1.0 / (1.0 + s),
                    UnitRootVariant::OneMinus => 1.0 - s,
                };
                out[0] = r * x[0] + e[0];
            }
            Dynamics::LinearSa {
                a,
                b,
                gamma,
                alpha,
                variant,
                radius,
            } => {
                let shrink = gamma / (n as f64).powf(*alpha);
                let (c, noise_coef) = match variant {
                    SaVariant::Decreasing => (shrink, shrink),
                    SaVariant::ScaledNoise => (*gamma, shrink),
                    SaVariant::Additive => (shrink, *gamma),
                };
                let mut xin = x.to_vec();
                if let Some(r) = radius {
                    project(&mut xin, *r);
                }
                matvec(a, d, &xin, out);
                for i in 0..d {
                    out[i] = xin[i] - c * (out[i] - b[i]) - noise_coef * e[i];
                }
                if let Some(r) = radius {
                    project(out, *r);
                }
            }
            Dynamics::Sgd {
                h,
                centers,
                batch,
                gamma,
                alpha,
                radius,
            } => {
                let c = gamma / (n as f64).powf(*alpha);
                let w = 1.0 / *batch as f64;
                out.copy_from_slice(x);
                for &j in &inn.batch {
                    let cj = &centers[j * d..(j + 1) * d];
                    for i in 0..d {
                        out[i] -= c * w * h[j] * (x[i] - cj[i]);
                    }
                }
                for i in 0..d {
                    out[i] -= c * e[i];
                }
                project(out, *radius);
            }
            Dynamics::Subsampled { m, b, .. } => {
                let mut cur = x.to_vec();
                for draw in e.chunks(d) {
                    matvec(m, d, &cur, out);
                    for i in 0..d {
                        out[i] += b[i] + draw[i];
                    }
                    cur.copy_from_slice(out);
                }
            }
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(BoundError::NonFinite { step: n });
        }
        Ok(())
    }

    /// Runs `X_1..X_n` from `rng`, calling `visit(k, X_k)` for each state.
    /// `X₁` is drawn first, then the innovations in step order.
    pub fn run_path<R: Rng + ?Sized>(
        &self,
        n: usize,
        rng: &mut R,
        mut visit: impl FnMut(usize, &[f64]),
    ) -> Result<()> {
        if n == 0 {
            return Err(BoundError::HorizonTooSmall(0));
        }
        if n > self.horizon_limit() {
            return Err(BoundError::ScheduleExhausted {
                n,
                last: self.horizon_limit(),
            });
        }
        let mut x = vec![0.0; self.d];
        let mut y = vec![0.0; self.d];
        let mut inn = Innovation::default();
        self.sample_init(rng, &mut x);
        visit(1, &x);
        for k in 2..=n {
            self.sample_innovation(k, rng, &mut inn);
            self.step_into(k, &x, &inn, &mut y)?;
            std::mem::swap(&mut x, &mut y);
            visit(k, &x);
        }
        Ok(())
    }

    /// Linear-model transition `(M_n, b_n, s_n)`; `None` for models that are
    /// not affine in `(x, ε)` with a single draw.
    pub fn affine_parts(&self, n: usize) -> Option<AffineStep> {
        let d = self.d;
        match &self.dynamics {
            Dynamics::Affine { m, b } => Some(AffineStep {
                m: m.clone(),
                b: b.clone(),
                noise_coef: 1.0,
            }),
            Dynamics::UnitRoot { c, alpha, variant } => {
                let s = c / (n as f64).powf(*alpha);
                let r = match variant {
                    UnitRootVariant::InverseOnePlus => 1.0 / (1.0 + s),
                    UnitRootVariant::OneMinus => 1.0 - s,
                };
                Some(AffineStep {
                    m: vec![r],
                    b: vec![0.0],
                    noise_coef: 1.0,
                })
            }
            Dynamics::LinearSa {
                a,
                b,
                gamma,
                alpha,
                variant,
                radius: None,
            } => {
                let shrink = gamma / (n as f64).powf(*alpha);
                let (c, s) = match variant {
                    SaVariant::Decreasing => (shrink, shrink),
                    SaVariant::ScaledNoise => (*gamma, shrink),
                    SaVariant::Additive => (shrink, *gamma),
                };
                let mut m = vec![0.0; d * d];
                for i in 0..d {
                    for j in 0..d {
                        m[i * d + j] = if i == j { 1.0 } else { 0.0 } - c * a[i * d + j];
                    }
                }
                Some(AffineStep {
                    m,
                    b: b.iter().map(|v| c * v).collect(),
                    noise_coef: -s,
                })
            }
            _ => None,
        }
    }

    /// Exact `E X_k` for `k = 1..=n` (linear models only).
    pub fn mean_path(&self, n: usize) -> Option<Vec<Vec<f64>>> {
        let mu = self.spec.noise.mean();
        let mut out = Vec::with_capacity(n);
        out.push(self.spec.init.mean());
        let mut tmp = vec![0.0; self.d];
        for k in 2..=n {
            let st = self.affine_parts(k)?;
            matvec(&st.m, self.d, &out[k - 2], &mut tmp);
            out.push(
                tmp.iter()
                    .zip(&st.b)
                    .map(|(v, b)| v + b + st.noise_coef * mu)
                    .collect(),
            );
        }
        Some(out)
    }

    /// Exact `E Σ_k X_k` (linear models only).
    pub fn sum_mean(&self, n: usize) -> Option<Vec<f64>> {
        let path = self.mean_path(n)?;
        let mut s = vec![0.0; self.d];
        for m in &path {
            for (a, b) in s.iter_mut().zip(m) {
                *a += b;
            }
        }
        Some(s)
    }

    /// Exact `Var Σ_k X_k` for scalar linear models.
    pub fn scalar_sum_variance(&self, n: usize) -> Option<f64> {
        if self.d != 1 {
            return None;
        }
        let var_e = self.spec.noise.variance();
        let var_x1 = match &self.spec.init {
            InitLaw::Point { .. } => 0.0,
            InitLaw::UniformBox { half_width, .. } => half_width * half_width / 3.0,
        };
        // S = K′_1 X_1 + Σ_j K′_j s_j ε_j with K′_n = 1, K′_j = 1 + M_{j+1} K′_{j+1}.
        let mut kp = 1.0;
        let mut var = 0.0;
        for j in (2..=n).rev() {
            let st = self.affine_parts(j)?;
            var += (kp * st.noise_coef).powi(2) * var_e;
            kp = 1.0 + st.m[0] * kp;
        }
        Some(var + kp * kp * var_x1)
    }

    /// The root `x*` of `A x = B` for linear SA models, the minimiser of the
    /// loss over the ball for SGD.
    pub fn x_star(&self) -> Option<Vec<f64>> {
        match &self.dynamics {
            Dynamics::LinearSa { a, b, .. } => {
                let am = DMatrix::from_row_slice(self.d, self.d, a);
                let sol = am.lu().solve(&nalgebra::DVector::from_column_slice(b))?;
                Some(sol.iter().copied().collect())
            }
            Dynamics::Sgd {
                h, centers, radius, ..
            } => {
                let total: f64 = h.iter().sum();
                let mut x = vec![0.0; self.d];
                for (j, hj) in h.iter().enumerate() {
                    for i in 0..self.d {
                        x[i] += hj * centers[j * self.d + i] / total;
                    }
                }
                project(&mut x, *radius);
                Some(x)
            }
            _ => None,
        }
    }

    /// Step size `c_n` multiplying `A` (linear SA) or the gradient (SGD).
    pub fn step_size(&self, n: usize) -> Option<f64> {
        match &self.dynamics {
            Dynamics::LinearSa {
                gamma,
                alpha,
                variant,
                ..
            } => Some(match variant {
                SaVariant::ScaledNoise => *gamma,
                _ => gamma / (n as f64).powf(*alpha),
            }),
            Dynamics::Sgd { gamma, alpha, .. } => Some(gamma / (n as f64).powf(*alpha)),
            _ => None,
        }
    }

    /// True for the unprojected decreasing-step linear SA model.
    pub fn is_plain_linear_sa(&self) -> bool {
        matches!(
            self.dynamics,
            Dynamics::LinearSa {
                variant: SaVariant::Decreasing,
                radius: None,
                ..
            }
        )
    }

    pub fn projection_radius(&self) -> Option<f64> {
        match &self.dynamics {
            Dynamics::LinearSa { radius, .. } => *radius,
            Dynamics::Sgd { radius, .. } => Some(*radius),
            _ => None,
        }
    }
}

/// `X_1..X_n` drawn from stream 0 of `seed`.
pub fn simulate(model: &ChainModel, n: usize, seed: u64) -> Result<Trajectory> {
    let mut states = Vec::with_capacity(n * model.d());
    model.run_path(n, &mut stream(seed, 0), |_, x| states.extend_from_slice(x))?;
    Ok(Trajectory { d: model.d(), states })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(example: ExampleSpec, noise: NoiseSpec) -> ChainModel {
        make_model(ModelSpec {
            example,
            noise,
            init: InitLaw::Point { x: vec![1.0] },
            p: 2.0,
        })
        .unwrap()
    }

    fn gauss() -> NoiseSpec {
        NoiseSpec::Gaussian { sigma: 1.0, d: 1 }
    }

    #[test]
    fn additive_schedule_matches_display() {
        let m = scalar(
            ExampleSpec::LinearSaAdditive {
                a: vec![vec![1.0]],
                b: vec![0.0],
                gamma: 0.5,
                alpha: 0.5,
            },
            gauss(),
        );
        for n in [2usize, 9, 100] {
            let (r, t, x) = m.schedule().eval(n).unwrap();
            assert!((r - (1.0 - 0.5 / (n as f64).sqrt())).abs() < 1e-15);
            assert_eq!((t, x), (0.5, 0.0));
        }
        assert_eq!(m.schedule().regime(), Regime::C16);
    }

    #[test]
    fn linear_sa_alpha_zero_is_constant() {
        let m = scalar(
            ExampleSpec::LinearSa {
                a: vec![vec![1.0]],
                b: vec![0.0],
                gamma: 0.5,
                alpha: 0.0,
            },
            gauss(),
        );
        for n in [2usize, 50] {
            assert_eq!(m.schedule().eval(n).unwrap(), (0.5, 0.5, 0.0));
        }
        assert_eq!(m.schedule().regime(), Regime::C15);
    }

    #[test]
    fn sgd_with_equal_curvatures_is_linear_in_rho() {
        let m = make_model(ModelSpec {
            example: ExampleSpec::ProjectedSgd {
                curvatures: vec![1.0, 1.0],
                centers: vec![vec![0.5, 0.0], vec![-0.5, 0.2]],
                batch: 1,
                gamma: 0.8,
                alpha: 0.5,
                radius: 3.0,
            },
            noise: NoiseSpec::Gaussian { sigma: 0.1, d: 2 },
            init: InitLaw::Point { x: vec![0.0, 0.0] },
            p: 2.0,
        })
        .unwrap();
        for n in [2usize, 7, 400] {
            let (r, _, _) = m.schedule().eval(n).unwrap();
            assert!((r - (1.0 - 0.8 / (n as f64).sqrt())).abs() < 1e-14);
        }
    }

    #[test]
    fn additive_step_hand_example() {
        // F_n(x, y) = (1 − γA/n^α) x + γB/n^α − γ y with γ/n^α = 0.5, γ = 0.5.
        let m = scalar(
            ExampleSpec::LinearSaAdditive {
                a: vec![vec![1.0]],
                b: vec![0.0],
                gamma: 0.5,
                alpha: 0.5,
            },
            gauss(),
        );
        let inn = Innovation {
            noise: vec![0.25],
            batch: vec![],
        };
        let mut out = [0.0];
        // n = 4: c_n = 0.25, so 1 − 0.25 − 0.5 · 0.25.
        m.step_into(4, &[1.0], &inn, &mut out).unwrap();
        assert!((out[0] - 0.625).abs() < 1e-15);
    }

    #[test]
    fn projection_caps_the_norm() {
        let m = make_model(ModelSpec {
            example: ExampleSpec::ProjectedLinearSa {
                a: vec![vec![1.0, 0.0], vec![0.0, 2.0]],
                b: vec![0.0, 0.0],
                gamma: 0.5,
                alpha: 0.5,
                radius: 1.0,
            },
            noise: NoiseSpec::Gaussian { sigma: 1.0, d: 2 },
            init: InitLaw::Point { x: vec![0.0, 0.0] },
            p: 2.0,
        })
        .unwrap();
        let inn = Innovation {
            noise: vec![-100.0, 50.0],
            batch: vec![],
        };
        let mut out = [0.0; 2];
        m.step_into(2, &[0.5, 0.5], &inn, &mut out).unwrap();
        let norm = (out[0] * out[0] + out[1] * out[1]).sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn simulate_is_reproducible() {
        let m = scalar(
            ExampleSpec::UnitRoot {
                c: 0.5,
                alpha: 0.5,
                variant: UnitRootVariant::OneMinus,
            },
            gauss(),
        );
        let a = simulate(&m, 500, 3).unwrap();
        let b = simulate(&m, 500, 3).unwrap();
        let c = simulate(&m, 500, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 500);
    }

    #[test]
    fn unit_root_stays_finite() {
        for variant in [UnitRootVariant::OneMinus, UnitRootVariant::InverseOnePlus] {
            let m = scalar(
                ExampleSpec::UnitRoot {
                    c: 0.5,
                    alpha: 0.5,
                    variant,
                },
                gauss(),
            );
            let t = simulate(&m, 10_000, 1).unwrap();
            assert!(t.states.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn rejections_name_the_constraint() {
        let bad = |example: ExampleSpec| {
            make_model(ModelSpec {
                example,
                noise: gauss(),
                init: InitLaw::Point { x: vec![0.0] },
                p: 2.0,
            })
            .unwrap_err()
            .to_string()
        };
        assert!(bad(ExampleSpec::LinearSaScaledNoise {
            a: vec![vec![1.0]],
            b: vec![0.0],
            gamma: 1.5,
            alpha: 0.5
        })
        .contains("gamma"));
        assert!(bad(ExampleSpec::UnitRoot {
            c: 1.5,
            alpha: 0.5,
            variant: UnitRootVariant::OneMinus
        })
        .contains("c"));
        assert!(bad(ExampleSpec::LinearSaAdditive {
            a: vec![vec![1.0]],
            b: vec![0.0],
            gamma: 0.5,
            alpha: 0.0
        })
        .contains("alpha"));
        assert!(bad(ExampleSpec::FunctionalAr {
            r: vec![vec![1.0]],
            b: vec![0.0]
        })
        .contains("||R||"));
    }

    #[test]
    fn operator_norms() {
        let m = [1.0, 2.0, -3.0, 0.5];
        assert_eq!(operator_norm(&m, 2, NormIndex::ONE), 4.0);
        assert_eq!(operator_norm(&m, 2, NormIndex::INF), 3.5);
        let two = operator_norm(&m, 2, NormIndex::TWO);
        // Largest singular value of [[1, 2], [-3, 0.5]] is ≈ 3.16909.
        assert!((two - 3.169_09).abs() < 1e-5);
        assert_eq!(operator_norm(&[0.5, 0.0, 0.0, -0.7], 2, NormIndex::new(3.0).unwrap()), 0.7);
    }

    #[test]
    fn mean_and_variance_recursions() {
        // X_n = 0.5 X_{n−1} + ε_n from X_1 = 1: E X_n = 0.5^{n−1}.
        let m = scalar(
            ExampleSpec::FunctionalAr {
                r: vec![vec![0.5]],
                b: vec![0.0],
            },
            gauss(),
        );
        let path = m.mean_path(5).unwrap();
        assert_eq!(path[4][0], 0.0625);
        // n = 3: S = X1 + X2 + X3, X2 = .5 + ε2, X3 = .25 + .5ε2 + ε3.
        // Var = 1.5² + 1 = 3.25.
        assert!((m.scalar_sum_variance(3).unwrap() - 3.25).abs() < 1e-14);
    }
}
