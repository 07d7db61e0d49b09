//! Monte-Carlo estimate of `E‖S_n‖_q`.

use serde::Serialize;

use super::tail::centered_samples;
use crate::chains::{ChainModel, FunctionalSpec};
use crate::error::{invalid, BoundError, Result};
use crate::norms::NormIndex;
use crate::par::Exec;

pub const MIN_MOMENT_REPS: usize = 10_000;

/// `z` such that `P(Z > z) = 0.01`.
const Z99: f64 = 2.326_347_874_040_841;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub q: f64,
    pub estimate: f64,
    pub se: f64,
    /// `estimate + 1.5 z₀.₉₉ SE` plus the centring margin. The 1.5 factor is
    /// a guard for heavy tails, hence `heuristic`.
    pub ucb99: f64,
    pub heuristic: bool,
}

/// Mean of `‖S_n‖_q` over `reps` replications (the vector `q`-norm of the
/// centred functional).
pub fn estimate_moment_norm(
    model: &ChainModel,
    f: &FunctionalSpec,
    n: usize,
    reps: usize,
    q: f64,
    seed: u64,
    exec: Exec,
) -> Result<MomentEstimate> {
    if !(1.0..=8.0).contains(&q) {
        return Err(BoundError::OrderOutOfRange { q, range: "[1, 8]" });
    }
    if reps < MIN_MOMENT_REPS {
        return Err(invalid("reps", format!("needs at least {MIN_MOMENT_REPS} replications, got {reps}")));
    }
    let qn = NormIndex::new(q)?;
    let (samples, margin_p) = centered_samples(model, f, n, reps, seed, exec)?;
    // The margin is a p-norm; convert to the q-norm scale.
    let m = f.out_dim(model) as f64;
    let p = model.p().value();
    let margin = if q < p {
        margin_p * m.powf(1.0 / q - if model.p().is_inf() { 0.0 } else { 1.0 / p })
    } else {
        margin_p
    };
    let norms: Vec<f64> = samples.iter().map(|s| qn.norm(s)).collect();
    let count = norms.len() as f64;
    let mean = norms.iter().sum::<f64>() / count;
    let var = norms.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (count - 1.0);
    let se = (var / count).sqrt();
    Ok(MomentEstimate {
        q,
        estimate: mean,
        se,
        ucb99: mean + 1.5 * Z99 * se + margin,
        heuristic: true,
    })
}
