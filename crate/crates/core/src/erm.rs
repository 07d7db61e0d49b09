//! Grid empirical risk minimisation for the scalar family
//! `f_k(θ, x) = (1 − θ/k^α) x` with absolute loss.

use serde::{Deserialize, Serialize};

use crate::chains::noise::gaussian_g;
use crate::chains::{make_model, ChainModel, ExampleSpec, InitLaw, ModelSpec, NoiseSpec, UnitRootVariant};
use crate::error::{invalid, BoundError, Result};
use crate::par::{try_map_range, Exec};
use crate::rng::stream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErmProblem {
    pub alpha: f64,
    pub theta0: f64,
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub noise: NoiseSpec,
    #[serde(default)]
    pub x1: f64,
    /// Lipschitz constant of the loss (1 for `|·|`).
    #[serde(default = "one")]
    pub lipschitz: f64,
}

fn one() -> f64 {
    1.0
}

impl ErmProblem {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(invalid("alpha", format!("needs alpha in (0, 1/2), got {}", self.alpha)));
        }
        if !(0.0 < self.theta_lo && self.theta_lo <= self.theta_hi && self.theta_hi < 1.0) {
            return Err(invalid("theta_lo/theta_hi", "needs 0 < theta_lo <= theta_hi < 1"));
        }
        if !(self.theta_lo..=self.theta_hi).contains(&self.theta0) {
            return Err(invalid("theta0", "must lie in [theta_lo, theta_hi]"));
        }
        if self.noise.dim() != 1 {
            return Err(invalid("noise", "the ERM family is scalar"));
        }
        if !(self.lipschitz > 0.0) {
            return Err(invalid("lipschitz", "must be positive"));
        }
        self.noise.validate()
    }

    /// The data-generating chain `X_k = f_k(θ⁰, X_{k−1}) + ε_k`.
    pub fn model(&self) -> Result<ChainModel> {
        self.validate()?;
        make_model(ModelSpec {
            example: ExampleSpec::UnitRoot {
                c: self.theta0,
                alpha: self.alpha,
                variant: UnitRootVariant::OneMinus,
            },
            noise: self.noise,
            init: InitLaw::Point { x: vec![self.x1] },
            p: 2.0,
        })
    }

    /// Uniform grid on `[θ_lo, θ_hi]` with spacing at most `1/(L n)`.
    pub fn grid(&self, n: usize) -> Vec<f64> {
        let width = self.theta_hi - self.theta_lo;
        let steps = (width * self.lipschitz * n as f64).ceil() as usize;
        if steps == 0 {
            return vec![self.theta_lo];
        }
        (0..=steps)
            .map(|i| self.theta_lo + width * i as f64 / steps as f64)
            .collect()
    }
}

fn shrink(theta: f64, alpha: f64, k: usize) -> f64 {
    1.0 - theta / (k as f64).powf(alpha)
}

/// `r_n(θ) = (1/(n−1)) Σ_{k=2}^n |X_k − f_k(θ, X_{k−1})|`.
pub fn empirical_risk(theta: f64, alpha: f64, traj: &[f64]) -> Result<f64> {
    let n = traj.len();
    if n < 2 {
        return Err(BoundError::HorizonTooSmall(n));
    }
    let s: f64 = (2..=n)
        .map(|k| (traj[k - 1] - shrink(theta, alpha, k) * traj[k - 2]).abs())
        .sum();
    Ok(s / (n - 1) as f64)
}

/// Grid argmin of `r_n`; ties go to the smaller `θ`.
pub fn erm_fit(grid: &[f64], alpha: f64, traj: &[f64]) -> Result<f64> {
    let mut best = (f64::INFINITY, f64::NAN);
    for &t in grid {
        let r = empirical_risk(t, alpha, traj)?;
        if r < best.0 {
            best = (r, t);
        }
    }
    Ok(best.1)
}

/// Monte-Carlo `R_n(θ)` over `reps` fresh trajectories: `(mean, se)`.
pub fn population_risk(
    problem: &ErmProblem,
    theta: f64,
    n: usize,
    reps: usize,
    seed: u64,
    exec: Exec,
) -> Result<(f64, f64)> {
    let model = problem.model()?;
    let vals = try_map_range(exec, reps, |i| {
        let mut traj = Vec::with_capacity(n);
        model.run_path(n, &mut stream(seed, i as u64), |_, x| traj.push(x[0]))?;
        empirical_risk(theta, problem.alpha, &traj)
    })?;
    let m = vals.iter().sum::<f64>() / reps as f64;
    let var = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (reps as f64 - 1.0).max(1.0);
    Ok((m, (var / reps as f64).sqrt()))
}

/// Exact `R_n(θ)` for Gaussian or zero noise: `X_{k−1}` is Gaussian with a
/// known mean and variance and independent of `ε_k`, so each summand is a
/// folded-normal mean.
pub fn exact_population_risk(problem: &ErmProblem, theta: f64, n: usize) -> Option<f64> {
    let sigma = match problem.noise {
        NoiseSpec::Gaussian { sigma, .. } => sigma,
        NoiseSpec::Zero { .. } => 0.0,
        _ => return None,
    };
    let (mut m, mut v) = (problem.x1, 0.0);
    let mut s = 0.0;
    for k in 2..=n {
        let t = (theta - problem.theta0) / (k as f64).powf(problem.alpha);
        let sd = (sigma * sigma + t * t * v).sqrt();
        s += if sd == 0.0 { (t * m).abs() } else { gaussian_g(t * m, sd) };
        let a = shrink(problem.theta0, problem.alpha, k);
        m *= a;
        v = a * a * v + sigma * sigma;
    }
    Some(s / (n - 1) as f64)
}

/// `ln N(Θ, ε)` for the distance `|θ − θ′| sup_k k^{−α} = |θ − θ′| 2^{−α}`,
/// floored at 1 as in the entropy definition.
pub fn covering_entropy(problem: &ErmProblem, eps: f64) -> f64 {
    let width = (problem.theta_hi - problem.theta_lo) * 2f64.powf(-problem.alpha);
    let count = (width / (2.0 * eps)).ceil().max(1.0);
    count.ln().max(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErmRow {
    pub n: usize,
    pub grid_points: usize,
    /// `R_n(θ̂) − min_grid R_n` per repetition.
    pub excess: Vec<f64>,
    pub excess_median: f64,
    pub excess_q10: f64,
    pub excess_q90: f64,
    /// `√(ln n / n^{1−2α})`.
    pub rate: f64,
    pub fitted_envelope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErmReport {
    pub rows: Vec<ErmRow>,
    /// `Ĉ`, fitted at the smallest horizon as the 90% quantile of
    /// `excess/rate` over repetitions.
    pub c_hat: f64,
    /// Repetitions whose excess is under the fitted envelope at every
    /// horizon past the first.
    pub dominated_reps: usize,
    pub reps: usize,
    pub exact_risk: bool,
}

impl ErmReport {
    pub fn medians_strictly_decrease(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].excess_median < w[0].excess_median)
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Runs `reps` repetitions of grid ERM at every `n` and records the excess
/// population risk. Population risk is exact for Gaussian or zero noise and
/// a Monte-Carlo estimate (`10⁴` paths) otherwise.
pub fn excess_risk_experiment(
    problem: &ErmProblem,
    n_grid: &[usize],
    reps: usize,
    seed: u64,
    exec: Exec,
) -> Result<ErmReport> {
    let model = problem.model()?;
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[1] <= w[0]) || n_grid[0] < 3 {
        return Err(invalid("n_grid", "must be strictly increasing and start at 3 or more"));
    }
    if reps == 0 {
        return Err(invalid("reps", "needs at least one repetition"));
    }
    let exact = exact_population_risk(problem, problem.theta0, 3).is_some();
    let alpha = problem.alpha;
    let mut rows = Vec::with_capacity(n_grid.len());
    for (j, &n) in n_grid.iter().enumerate() {
        let grid = problem.grid(n);
        let risk_seed = crate::rng::derive_seed(seed, &format!("erm-risk-{n}"));
        let risks: Vec<f64> = try_map_range(exec, grid.len(), |i| match exact_population_risk(problem, grid[i], n) {
            Some(r) => Ok(r),
            None => population_risk(problem, grid[i], n, 10_000, risk_seed, Exec::Sequential).map(|r| r.0),
        })?;
        let min_risk = risks.iter().copied().fold(f64::INFINITY, f64::min);
        let data_seed = crate::rng::derive_seed(seed, &format!("erm-data-{j}"));
        let excess = try_map_range(exec, reps, |r| -> Result<f64> {
            let mut traj = Vec::with_capacity(n);
            model.run_path(n, &mut stream(data_seed, r as u64), |_, x| traj.push(x[0]))?;
            let th = erm_fit(&grid, alpha, &traj)?;
            let idx = grid.iter().position(|g| *g == th).expect("fit returns a grid point");
            Ok((risks[idx] - min_risk).max(0.0))
        })?;
        let mut sorted = excess.clone();
        sorted.sort_by(f64::total_cmp);
        let nf = n as f64;
        rows.push(ErmRow {
            n,
            grid_points: grid.len(),
            excess_median: quantile(&sorted, 0.5),
            excess_q10: quantile(&sorted, 0.1),
            excess_q90: quantile(&sorted, 0.9),
            excess,
            rate: (nf.ln() / nf.powf(1.0 - 2.0 * alpha)).sqrt(),
            fitted_envelope: 0.0,
        });
    }
    let first = &rows[0];
    let mut ratios: Vec<f64> = first.excess.iter().map(|e| e / first.rate).collect();
    ratios.sort_by(f64::total_cmp);
    let c_hat = quantile(&ratios, 0.9);
    for row in &mut rows {
        row.fitted_envelope = c_hat * row.rate;
    }
    let dominated_reps = (0..reps)
        .filter(|&r| rows[1..].iter().all(|row| row.excess[r] <= row.fitted_envelope))
        .count();
    Ok(ErmReport {
        rows,
        c_hat,
        dominated_reps,
        reps,
        exact_risk: exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(noise: NoiseSpec) -> ErmProblem {
        ErmProblem {
            alpha: 0.25,
            theta0: 0.5,
            theta_lo: 0.1,
            theta_hi: 0.9,
            noise,
            x1: 1.0,
            lipschitz: 1.0,
        }
    }

    #[test]
    fn empirical_risk_hand_example() {
        // α = 0 is outside the family's range but the formula is the same.
        assert_eq!(empirical_risk(0.5, 0.0, &[1.0, 0.5]).unwrap(), 0.0);
        assert!(empirical_risk(0.5, 0.0, &[1.0]).is_err());
    }

    #[test]
    fn noiseless_true_parameter_has_zero_risk() {
        let p = problem(NoiseSpec::Zero { d: 1 });
        let m = p.model().unwrap();
        let mut traj = Vec::new();
        m.run_path(100, &mut stream(1, 0), |_, x| traj.push(x[0])).unwrap();
        assert!(empirical_risk(0.5, 0.25, &traj).unwrap() < 1e-15);
        assert!(exact_population_risk(&p, 0.5, 100).unwrap() < 1e-15);
        let grid = p.grid(100);
        let th = erm_fit(&grid, 0.25, &traj).unwrap();
        let nearest = grid
            .iter()
            .copied()
            .min_by(|a, b| (a - 0.5).abs().total_cmp(&(b - 0.5).abs()))
            .unwrap();
        assert_eq!(th, nearest);
    }

    #[test]
    fn single_point_grid() {
        assert_eq!(erm_fit(&[0.3], 0.25, &[1.0, 2.0, 0.5]).unwrap(), 0.3);
    }

    #[test]
    fn grid_spacing_and_covering() {
        let p = problem(NoiseSpec::Gaussian { sigma: 1.0, d: 1 });
        for n in [4usize, 10, 250, 4000] {
            let g = p.grid(n);
            assert!(g.windows(2).all(|w| w[1] - w[0] <= 1.0 / n as f64 + 1e-15));
            let h = covering_entropy(&p, 1.0 / n as f64);
            let mid = (1.0 + 0.8 * n as f64).ln();
            assert!(h <= mid.max(1.0) && mid <= 2.0 * (n as f64).ln(), "n = {n}");
        }
    }

    #[test]
    fn exact_risk_matches_monte_carlo() {
        let p = problem(NoiseSpec::Gaussian { sigma: 1.0, d: 1 });
        for theta in [0.2, 0.5, 0.85] {
            let exact = exact_population_risk(&p, theta, 60).unwrap();
            let (mc, se) = population_risk(&p, theta, 60, 20_000, 4, Exec::Parallel).unwrap();
            assert!((exact - mc).abs() < 4.0 * se, "theta = {theta}: {exact} vs {mc} ± {se}");
        }
    }

    #[test]
    fn far_parameter_has_higher_risk() {
        let p = problem(NoiseSpec::Gaussian { sigma: 1.0, d: 1 });
        let (near, s1) = population_risk(&p, 0.5, 200, 10_000, 1, Exec::Parallel).unwrap();
        let (far, s2) = population_risk(&p, 0.9, 200, 10_000, 1, Exec::Parallel).unwrap();
        assert!(far - near > 3.0 * (s1 + s2));
    }

    #[test]
    fn risk_is_convex_on_the_grid() {
        let p = problem(NoiseSpec::Gaussian { sigma: 1.0, d: 1 });
        let m = p.model().unwrap();
        let mut traj = Vec::new();
        m.run_path(300, &mut stream(2, 0), |_, x| traj.push(x[0])).unwrap();
        let g = p.grid(50);
        let r: Vec<f64> = g.iter().map(|t| empirical_risk(*t, 0.25, &traj).unwrap()).collect();
        for w in r.windows(3) {
            assert!(w[0] + w[2] - 2.0 * w[1] >= -1e-12);
        }
    }

    #[test]
    fn noiseless_excess_is_zero() {
        let p = problem(NoiseSpec::Zero { d: 1 });
        let rep = excess_risk_experiment(&p, &[50, 100], 3, 1, Exec::Parallel).unwrap();
        for row in &rep.rows {
            assert!(row.excess.iter().all(|e| *e == 0.0));
        }
    }

    #[test]
    fn validation() {
        let mut p = problem(NoiseSpec::Zero { d: 1 });
        p.alpha = 0.5;
        assert!(p.validate().is_err());
        p.alpha = 0.25;
        p.theta0 = 0.95;
        assert!(p.validate().is_err());
    }
}
