//! Empirical tails of `‖S_n‖_p` with one-sided 99% bands.

use serde::{Deserialize, Serialize};

use super::clopper_pearson::{lower, upper, LEVEL};
use crate::chains::{ChainModel, FunctionalSpec};
use crate::error::{invalid, BoundError, Result};
use crate::norms::NormIndex;
use crate::par::{try_map_range, Exec};
use crate::rng::{derive_seed, stream};

/// Replications required by [`estimate_tail`].
pub const MIN_TAIL_REPS: usize = 1_000;

/// Thresholds `u` on the raw `‖S_n‖_p` scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridPolicy {
    /// `points` log-spaced values from the median of `‖S_n‖_p` to 1.5 times
    /// its maximum.
    Auto { points: usize },
    Explicit { u: Vec<f64> },
    Linear { lo: f64, hi: f64, points: usize },
}

impl Default for GridPolicy {
    fn default() -> Self {
        GridPolicy::Auto { points: 40 }
    }
}

impl GridPolicy {
    /// Resolves the grid given the sorted sample norms (or exact support).
    pub fn resolve(&self, median: f64, max: f64) -> Result<Vec<f64>> {
        let grid = match self {
            GridPolicy::Auto { points } => {
                let points = (*points).max(2);
                let hi = 1.5 * max;
                let lo = if median > 0.0 { median } else { hi * 1e-3 };
                if !(hi > 0.0) {
                    // Degenerate sample: a single positive threshold.
                    vec![1.0]
                } else {
                    let (a, b) = (lo.ln(), hi.ln());
                    (0..points)
                        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
                        .collect()
                }
            }
            GridPolicy::Explicit { u } => u.clone(),
            GridPolicy::Linear { lo, hi, points } => {
                let points = (*points).max(2);
                (0..points)
                    .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
                    .collect()
            }
        };
        if grid.is_empty() || grid.iter().any(|u| !(u.is_finite() && *u >= 0.0)) {
            return Err(invalid("grid", "thresholds must be finite and nonnegative"));
        }
        let mut grid = grid;
        grid.sort_by(f64::total_cmp);
        Ok(grid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub u_grid: Vec<f64>,
    /// Replications with `‖S_n‖_p ≥ u` (for exact tails: the probability
    /// scaled by `n_reps`, rounded).
    pub counts: Vec<u64>,
    pub n_reps: usize,
    pub p_hat: Vec<f64>,
    pub p_lcb: Vec<f64>,
    pub p_ucb: Vec<f64>,
    pub exact: bool,
    pub n: usize,
    pub out_dim: usize,
    pub p: f64,
    /// Uncertainty of the centring, already folded into the bands.
    pub centering_margin: f64,
    pub max_norm: f64,
}

impl TailEstimate {
    pub fn norm_index(&self) -> NormIndex {
        NormIndex::new(self.p).expect("validated at construction")
    }
}

/// `count(‖S‖ ≥ t)` for sorted norms.
fn count_ge(sorted: &[f64], t: f64) -> u64 {
    (sorted.len() - sorted.partition_point(|v| *v < t)) as u64
}

/// Centred samples `f(X) − E f` and the centring margin `r` with
/// `‖E f − m̂‖_p ≤ r` (zero for exact centring).
pub fn centered_samples(
    model: &ChainModel,
    f: &FunctionalSpec,
    n: usize,
    reps: usize,
    seed: u64,
    exec: Exec,
) -> Result<(Vec<Vec<f64>>, f64)> {
    let draw = |s: u64, count: usize| {
        try_map_range(exec, count, |i| f.sample(model, n, &mut stream(s, i as u64)))
    };
    let samples = draw(seed, reps)?;
    let (mean, margin) = match f.exact_mean(model, n) {
        Some(m) => (m, 0.0),
        None => {
            let pilot_seed = derive_seed(seed, "pilot");
            if pilot_seed == seed {
                return Err(BoundError::SeedCollision(seed));
            }
            let pilot = draw(pilot_seed, 10 * reps)?;
            let m = f.out_dim(model);
            let count = pilot.len() as f64;
            let mut mean = vec![0.0; m];
            for v in &pilot {
                for (a, b) in mean.iter_mut().zip(v) {
                    *a += b / count;
                }
            }
            let mut var = vec![0.0; m];
            for v in &pilot {
                for ((a, b), c) in var.iter_mut().zip(v).zip(&mean) {
                    *a += (b - c) * (b - c) / (count - 1.0);
                }
            }
            let se: Vec<f64> = var.iter().map(|v| (v / count).sqrt()).collect();
            (mean, 3.0 * model.p().norm(&se))
        }
    };
    let centred = samples
        .into_iter()
        .map(|v| v.iter().zip(&mean).map(|(a, b)| a - b).collect())
        .collect();
    Ok((centred, margin))
}

/// Exceedance frequencies of `‖S_n‖_p` with Clopper–Pearson 99% bands.
/// Replication `i` uses stream `i` of `seed`, so results do not depend on
/// the thread count.
pub fn estimate_tail(
    model: &ChainModel,
    f: &FunctionalSpec,
    n: usize,
    reps: usize,
    grid: &GridPolicy,
    seed: u64,
    exec: Exec,
) -> Result<TailEstimate> {
    if reps < MIN_TAIL_REPS {
        return Err(invalid("reps", format!("needs at least {MIN_TAIL_REPS} replications, got {reps}")));
    }
    let p = model.p();
    let (samples, margin) = centered_samples(model, f, n, reps, seed, exec)?;
    let mut norms: Vec<f64> = samples.iter().map(|s| p.norm(s)).collect();
    norms.sort_by(f64::total_cmp);
    let max = *norms.last().unwrap();
    let median = norms[norms.len() / 2];
    let u_grid = grid.resolve(median, max)?;
    let nr = reps as u64;
    let mut est = TailEstimate {
        counts: Vec::with_capacity(u_grid.len()),
        p_hat: Vec::with_capacity(u_grid.len()),
        p_lcb: Vec::with_capacity(u_grid.len()),
        p_ucb: Vec::with_capacity(u_grid.len()),
        u_grid,
        n_reps: reps,
        exact: false,
        n,
        out_dim: f.out_dim(model),
        p: p.value(),
        centering_margin: margin,
        max_norm: max,
    };
    for &u in &est.u_grid {
        let k = count_ge(&norms, u);
        est.counts.push(k);
        est.p_hat.push(k as f64 / reps as f64);
        est.p_lcb.push(lower(count_ge(&norms, u + margin), nr, LEVEL));
        est.p_ucb.push(upper(count_ge(&norms, u - margin), nr, LEVEL));
    }
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::{make_model, ExampleSpec, InitLaw, ModelSpec, NoiseSpec};

    fn sa(noise: NoiseSpec) -> ChainModel {
        make_model(ModelSpec {
            example: ExampleSpec::LinearSa {
                a: vec![vec![1.0]],
                b: vec![0.5],
                gamma: 0.5,
                alpha: 0.5,
            },
            noise,
            init: InitLaw::Point { x: vec![0.0] },
            p: 2.0,
        })
        .unwrap()
    }

    #[test]
    fn noiseless_tail_is_zero() {
        let m = sa(NoiseSpec::Zero { d: 1 });
        let t = estimate_tail(
            &m,
            &FunctionalSpec::SumOfStates,
            50,
            1000,
            &GridPolicy::Explicit { u: vec![0.0, 1e-9, 1.0] },
            1,
            Exec::Parallel,
        )
        .unwrap();
        assert_eq!(t.counts[0], 1000);
        assert!(t.max_norm < 1e-12);
        assert_eq!(&t.counts[1..], &[0, 0]);
    }

    #[test]
    fn invariants_and_determinism() {
        let m = sa(NoiseSpec::Gaussian { sigma: 1.0, d: 1 });
        let run = |exec| {
            estimate_tail(&m, &FunctionalSpec::SumOfNorms, 40, 2000, &GridPolicy::default(), 9, exec).unwrap()
        };
        let a = run(Exec::Parallel);
        let b = run(Exec::Sequential);
        assert_eq!(a, b);
        assert!(a.centering_margin > 0.0);
        for w in a.counts.windows(2) {
            assert!(w[0] >= w[1]);
        }
        for i in 0..a.u_grid.len() {
            assert!(a.p_lcb[i] <= a.p_hat[i] && a.p_hat[i] <= a.p_ucb[i]);
            assert!(a.p_ucb[i] <= 1.0 && a.p_lcb[i] >= 0.0);
        }
    }

    #[test]
    fn too_few_reps_rejected() {
        let m = sa(NoiseSpec::Gaussian { sigma: 1.0, d: 1 });
        let e = estimate_tail(&m, &FunctionalSpec::SumOfStates, 10, 999, &GridPolicy::default(), 1, Exec::Parallel);
        assert!(e.is_err());
    }
}
