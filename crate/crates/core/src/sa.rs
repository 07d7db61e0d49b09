//! Stochastic approximation by averaging: final iterate, uniform average and
//! suffix average of linear SA (or projected SGD) iterates.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::chains::ChainModel;
use crate::error::{invalid, BoundError, Result};
use crate::par::{pairwise_sum, try_map_range, Exec};
use crate::rng::stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SaPolicy {
    FinalIterate,
    UniformAverage,
    /// Mean of `X_i` over `⌊n/2⌋ ≤ i ≤ n`.
    SuffixAverage,
}

/// A model whose iterates target `x_star`.
#[derive(Debug, Clone)]
pub struct SaRun<'a> {
    pub model: &'a ChainModel,
    pub x_star: Vec<f64>,
}

impl<'a> SaRun<'a> {
    /// Needs a linear SA or SGD model with zero-mean noise, so that `x*` is
    /// the fixed point of the mean dynamics.
    pub fn new(model: &'a ChainModel) -> Result<Self> {
        let x_star = model
            .x_star()
            .ok_or_else(|| BoundError::NotApplicable("averaging needs a linear SA or SGD model".into()))?;
        if model.noise().mean() != 0.0 {
            return Err(BoundError::NotApplicable(
                "averaging targets x* only for zero-mean noise".into(),
            ));
        }
        Ok(SaRun { model, x_star })
    }
}

/// Estimators at one horizon and their `p`-norm errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SaOutcome {
    pub n: usize,
    pub x_final: Vec<f64>,
    pub x_bar: Vec<f64>,
    pub x_hat: Vec<f64>,
    pub err_final: f64,
    pub err_uniform: f64,
    pub err_suffix: f64,
}

impl SaOutcome {
    pub fn error(&self, policy: SaPolicy) -> f64 {
        match policy {
            SaPolicy::FinalIterate => self.err_final,
            SaPolicy::UniformAverage => self.err_uniform,
            SaPolicy::SuffixAverage => self.err_suffix,
        }
    }
}

fn suffix_start(n: usize) -> usize {
    (n / 2).max(1)
}

/// Estimators at each checkpoint of one path drawn from `rng`.
pub fn run_checkpoints<R: rand::Rng + ?Sized>(
    run: &SaRun<'_>,
    checkpoints: &[usize],
    rng: &mut R,
) -> Result<Vec<SaOutcome>> {
    let n_max = *checkpoints
        .iter()
        .max()
        .ok_or_else(|| invalid("checkpoints", "need at least one horizon"))?;
    if checkpoints.iter().any(|&n| n < 2) {
        return Err(BoundError::HorizonTooSmall(1));
    }
    let d = run.model.d();
    // prefix[k] = Σ_{i ≤ k} X_i, row-major with prefix[0] = 0.
    let mut prefix = vec![0.0; (n_max + 1) * d];
    run.model.run_path(n_max, rng, |k, x| {
        for i in 0..d {
            prefix[k * d + i] = prefix[(k - 1) * d + i] + x[i];
        }
    })?;
    let p = run.model.p();
    Ok(checkpoints
        .iter()
        .map(|&n| {
            let x_final: Vec<f64> = (0..d).map(|i| prefix[n * d + i] - prefix[(n - 1) * d + i]).collect();
            let x_bar: Vec<f64> = (0..d).map(|i| prefix[n * d + i] / n as f64).collect();
            let h = suffix_start(n);
            let m = (n - h + 1) as f64;
            let x_hat: Vec<f64> = (0..d)
                .map(|i| (prefix[n * d + i] - prefix[(h - 1) * d + i]) / m)
                .collect();
            SaOutcome {
                n,
                err_final: p.distance(&x_final, &run.x_star),
                err_uniform: p.distance(&x_bar, &run.x_star),
                err_suffix: p.distance(&x_hat, &run.x_star),
                x_final,
                x_bar,
                x_hat,
            }
        })
        .collect())
}

/// One path of length `n` from stream 0 of `seed`.
pub fn run_sa(run: &SaRun<'_>, n: usize, seed: u64) -> Result<SaOutcome> {
    Ok(run_checkpoints(run, &[n], &mut stream(seed, 0))?.remove(0))
}

fn require_bias_model(model: &ChainModel) -> Result<(f64, f64, f64)> {
    if !model.is_plain_linear_sa() {
        return Err(BoundError::NotApplicable(
            "bias bounds need the unprojected decreasing-step linear SA model".into(),
        ));
    }
    let (lmin, lmax) = model.spectrum().expect("linear SA has a spectrum");
    let c2 = model.step_size(2).expect("linear SA has a step size");
    // ‖I − c A‖ = 1 − c λ_min needs c (λ_min + λ_max) ≤ 2 at the largest step.
    if c2 * (lmin + lmax) > 2.0 {
        return Err(BoundError::NotApplicable(format!(
            "step too large for the bias bound: c_2 (lambda_min + lambda_max) = {} > 2",
            c2 * (lmin + lmax)
        )));
    }
    let gamma = c2 * 2f64.powf(sa_alpha(model));
    Ok((gamma * lmin, sa_alpha(model), lmin))
}

fn sa_alpha(model: &ChainModel) -> f64 {
    match model.spec().example {
        crate::chains::ExampleSpec::LinearSa { alpha, .. } => alpha,
        _ => unreachable!("checked by is_plain_linear_sa"),
    }
}

/// `‖E X₁ − x*‖_p`.
pub fn initial_error(run: &SaRun<'_>) -> f64 {
    run.model.p().distance(&run.model.spec().init.mean(), &run.x_star)
}

/// `‖E X₁ − x*‖_p exp{−γλ_min (n − 2)/n^α}`, valid since
/// `Π_{j ≤ n}(1 − γλ/j^α) ≤ exp{−γλ (n − 1)/n^α}`.
pub fn mean_bias_bound(run: &SaRun<'_>, n: usize) -> Result<f64> {
    let (gl, alpha, _) = require_bias_model(run.model)?;
    let nf = n as f64;
    Ok(initial_error(run) * (-gl * (nf - 2.0) / nf.powf(alpha)).exp())
}

/// The displayed form with `γλ_min/(1 − α)²` in the exponent. Too strong for
/// `α > 0`; kept for comparison.
pub fn mean_bias_bound_as_printed(run: &SaRun<'_>, n: usize) -> Result<f64> {
    let (gl, alpha, _) = require_bias_model(run.model)?;
    let nf = n as f64;
    Ok(initial_error(run) * (-gl / (1.0 - alpha).powi(2) * (nf - 2.0) / nf.powf(alpha)).exp())
}

/// `Σ_{k ≥ 2} exp{−c (k − 2)/k^α}`: direct summation, then an integral
/// bound on the remainder.
fn bias_series(c: f64, alpha: f64) -> f64 {
    const DIRECT: usize = 2_000_000;
    let term = |k: usize| (-c * (k as f64 - 2.0) / (k as f64).powf(alpha)).exp();
    let mut s = 0.0;
    let mut k = 2;
    while k <= DIRECT {
        let t = term(k);
        s += t;
        if t < 1e-17 && k > 16 {
            return s;
        }
        k += 1;
    }
    // For t ≥ K: (t − 2)/t^α ≥ (1 − 2/K) t^{1−α}, and the summand decreases,
    // so the remainder is at most ∫_K^∞ exp{−c′ t^β} dt with β = 1 − α.
    let kf = DIRECT as f64;
    let beta = 1.0 - alpha;
    let cp = c * (1.0 - 2.0 / kf);
    let a = 1.0 / beta;
    let x = cp * kf.powf(beta);
    let ln_tail = -a * cp.ln() - beta.ln() + ln_gamma(a) + gamma_ur(a, x).ln();
    s + ln_tail.exp()
}

/// `C₀ = ‖E X₁ − x*‖_p (1 + Σ_{k ≥ 2} exp{−γλ_min (k − 2)/k^α})`, so that
/// `‖E X̄_n − x*‖_p ≤ C₀/n`.
pub fn bias_constant_c0(run: &SaRun<'_>) -> Result<f64> {
    let (gl, alpha, _) = require_bias_model(run.model)?;
    let e1 = initial_error(run);
    if e1 == 0.0 {
        return Ok(0.0);
    }
    Ok(e1 * (1.0 + bias_series(gl, alpha)))
}

/// `C₀` with the exponent divided by `(1 − α)²` as displayed.
pub fn bias_constant_c0_as_printed(run: &SaRun<'_>) -> Result<f64> {
    let (gl, alpha, _) = require_bias_model(run.model)?;
    let e1 = initial_error(run);
    if e1 == 0.0 {
        return Ok(0.0);
    }
    Ok(e1 * (1.0 + bias_series(gl / (1.0 - alpha).powi(2), alpha)))
}

/// Exact `‖E X_n − x*‖`, `‖E X̄_n − x*‖` and `‖E X̂_n − x*‖` for
/// `n = 1..=n_max` from the mean recursion.
pub fn exact_mean_errors(run: &SaRun<'_>, n_max: usize) -> Result<Vec<(f64, f64, f64)>> {
    let path = run
        .model
        .mean_path(n_max)
        .ok_or_else(|| BoundError::NotApplicable("exact means need a linear model".into()))?;
    let d = run.model.d();
    let p = run.model.p();
    let mut prefix = vec![vec![0.0; d]];
    for (k, m) in path.iter().enumerate() {
        let next: Vec<f64> = prefix[k].iter().zip(m).map(|(a, b)| a + b).collect();
        prefix.push(next);
    }
    Ok((1..=n_max)
        .map(|n| {
            let bar: Vec<f64> = prefix[n].iter().map(|v| v / n as f64).collect();
            let h = suffix_start(n);
            let cnt = (n - h + 1) as f64;
            let hat: Vec<f64> = prefix[n]
                .iter()
                .zip(&prefix[h - 1])
                .map(|(a, b)| (a - b) / cnt)
                .collect();
            (
                p.distance(&path[n - 1], &run.x_star),
                p.distance(&bar, &run.x_star),
                p.distance(&hat, &run.x_star),
            )
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SaRow {
    pub n: usize,
    pub err_final: f64,
    pub err_uniform: f64,
    pub err_suffix: f64,
    pub se_uniform: f64,
    pub se_suffix: f64,
    /// `mean_bias_bound(n)` when defined.
    pub bias_bound: Option<f64>,
    pub c0_over_n: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SaReport {
    pub rows: Vec<SaRow>,
    pub slope_final: f64,
    pub slope_uniform: f64,
    pub slope_suffix: f64,
}

/// Least-squares slope of `ln y` on `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Monte-Carlo mean errors of the three estimators at each checkpoint,
/// replication `i` on stream `i` of `seed`.
pub fn sa_experiment(
    run: &SaRun<'_>,
    checkpoints: &[usize],
    reps: usize,
    seed: u64,
    exec: Exec,
) -> Result<SaReport> {
    if reps < 2 {
        return Err(invalid("reps", "needs at least two replications"));
    }
    let outs = try_map_range(exec, reps, |i| run_checkpoints(run, checkpoints, &mut stream(seed, i as u64)))?;
    let c0 = bias_constant_c0(run).ok();
    let mut rows = Vec::with_capacity(checkpoints.len());
    for (j, &n) in checkpoints.iter().enumerate() {
        let col = |policy: SaPolicy| -> (f64, f64) {
            let v: Vec<f64> = outs.iter().map(|o| o[j].error(policy)).collect();
            let mean = pairwise_sum(&v) / reps as f64;
            let sq: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
            let se = (pairwise_sum(&sq) / (reps as f64 - 1.0) / reps as f64).sqrt();
            (mean, se)
        };
        let (ef, _) = col(SaPolicy::FinalIterate);
        let (eu, su) = col(SaPolicy::UniformAverage);
        let (es, ss) = col(SaPolicy::SuffixAverage);
        rows.push(SaRow {
            n,
            err_final: ef,
            err_uniform: eu,
            err_suffix: es,
            se_uniform: su,
            se_suffix: ss,
            bias_bound: mean_bias_bound(run, n).ok(),
            c0_over_n: c0.map(|c| c / n as f64),
        });
    }
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let slope = |f: fn(&SaRow) -> f64| loglog_slope(&ns, &rows.iter().map(f).collect::<Vec<_>>());
    Ok(SaReport {
        slope_final: slope(|r| r.err_final),
        slope_uniform: slope(|r| r.err_uniform),
        slope_suffix: slope(|r| r.err_suffix),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::{make_model, ExampleSpec, InitLaw, ModelSpec, NoiseSpec};

    fn scalar_sa(gamma: f64, alpha: f64, x1: f64, noise: NoiseSpec) -> ChainModel {
        make_model(ModelSpec {
            example: ExampleSpec::LinearSa {
                a: vec![vec![1.0]],
                b: vec![1.0],
                gamma,
                alpha,
            },
            noise,
            init: InitLaw::Point { x: vec![x1] },
            p: 2.0,
        })
        .unwrap()
    }

    #[test]
    fn noiseless_geometric_recursion() {
        let m = scalar_sa(0.5, 0.0, 0.0, NoiseSpec::Zero { d: 1 });
        let run = SaRun::new(&m).unwrap();
        for n in [2usize, 5, 20] {
            let o = run_sa(&run, n, 1).unwrap();
            assert!((o.x_final[0] - (1.0 - 0.5f64.powi(n as i32 - 1))).abs() < 1e-15);
        }
    }

    #[test]
    fn fixed_point_has_zero_error() {
        let m = scalar_sa(0.5, 0.3, 1.0, NoiseSpec::Zero { d: 1 });
        let run = SaRun::new(&m).unwrap();
        let o = run_sa(&run, 50, 1).unwrap();
        assert_eq!((o.err_final, o.err_uniform, o.err_suffix), (0.0, 0.0, 0.0));
        assert_eq!(bias_constant_c0(&run).unwrap(), 0.0);
    }

    #[test]
    fn c0_geometric_series_at_alpha_zero() {
        let m = scalar_sa(0.5, 0.0, 0.0, NoiseSpec::Zero { d: 1 });
        let run = SaRun::new(&m).unwrap();
        let expected = 1.0 + 1.0 / (1.0 - (-0.5f64).exp());
        assert!((bias_constant_c0(&run).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn mean_bias_examples() {
        let m = scalar_sa(0.5, 0.0, 0.0, NoiseSpec::Zero { d: 1 });
        let run = SaRun::new(&m).unwrap();
        assert_eq!(mean_bias_bound(&run, 2).unwrap(), 1.0);
        assert!((mean_bias_bound(&run, 12).unwrap() - (-5.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn printed_bias_bound_fails_for_positive_alpha() {
        // γλ = 0.5, α = 0.5, n = 3: exact (1 − .5/√2)(1 − .5/√3) ≈ 0.460 but
        // the printed form gives exp(−2/√3) ≈ 0.315.
        let m = scalar_sa(0.5, 0.5, 0.0, NoiseSpec::Zero { d: 1 });
        let run = SaRun::new(&m).unwrap();
        let exact = exact_mean_errors(&run, 3).unwrap()[2].0;
        assert!(exact <= mean_bias_bound(&run, 3).unwrap());
        assert!(exact > mean_bias_bound_as_printed(&run, 3).unwrap());
    }

    #[test]
    fn series_tail_bound_is_consistent() {
        // α close to 1 forces the integral remainder; it must exceed the
        // direct partial sum and stay finite.
        let direct: f64 = (2..2_000_000).map(|k| (-0.5 * (k as f64 - 2.0) / (k as f64).powf(0.9)).exp()).sum();
        let s = bias_series(0.5, 0.9);
        assert!(s.is_finite() && s >= direct);
    }

    #[test]
    fn suffix_average_uses_its_own_count() {
        let m = scalar_sa(0.5, 0.0, 0.0, NoiseSpec::Zero { d: 1 });
        let run = SaRun::new(&m).unwrap();
        let o = run_sa(&run, 4, 1).unwrap();
        // X = 0, .5, .75, .875; suffix over i = 2..4.
        assert!((o.x_hat[0] - (0.5 + 0.75 + 0.875) / 3.0).abs() < 1e-15);
        assert!((o.x_bar[0] - 2.125 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn nonzero_mean_noise_rejected() {
        let m = scalar_sa(0.5, 0.0, 0.0, NoiseSpec::TwoAtom { a: 0.0, b: 1.0, pr: 0.5 });
        assert!(SaRun::new(&m).is_err());
    }

    #[test]
    fn slope_of_exact_power() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.5)).collect();
        assert!((loglog_slope(&x, &y) + 0.5).abs() < 1e-12);
    }
}
