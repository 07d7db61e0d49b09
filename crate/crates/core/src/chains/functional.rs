//! Separately 1-Lipschitz functionals of a trajectory.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use super::model::ChainModel;
use crate::error::{invalid, Result};
use crate::norms::NormIndex;

/// Path functional `f(X_1, …, X_n) ∈ ℝ^m` whose coordinates are separately
/// 1-Lipschitz for `d(x, x′) = ‖x − x′‖_p`.
#[derive(Clone)]
pub enum FunctionalSpec {
    /// `Σ_k X_k` (`m = d`).
    SumOfStates,
    /// `Σ_k ‖X_k‖_p` (`m = 1`).
    SumOfNorms,
    /// User function of the row-major trajectory. The caller vouches for
    /// the Lipschitz property.
    Custom {
        label: String,
        out_dim: usize,
        f: Arc<dyn Fn(&[f64], usize) -> Vec<f64> + Send + Sync>,
    },
}

impl fmt::Debug for FunctionalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionalSpec::SumOfStates => f.write_str("SumOfStates"),
            FunctionalSpec::SumOfNorms => f.write_str("SumOfNorms"),
            FunctionalSpec::Custom { label, out_dim, .. } => write!(f, "Custom({label}, m = {out_dim})"),
        }
    }
}

impl FunctionalSpec {
    pub fn out_dim(&self, model: &ChainModel) -> usize {
        match self {
            FunctionalSpec::SumOfStates => model.d(),
            FunctionalSpec::SumOfNorms => 1,
            FunctionalSpec::Custom { out_dim, .. } => *out_dim,
        }
    }

    pub fn label(&self) -> String {
        match self {
            FunctionalSpec::SumOfStates => "sum_of_states".into(),
            FunctionalSpec::SumOfNorms => "sum_of_norms".into(),
            FunctionalSpec::Custom { label, .. } => label.clone(),
        }
    }

    /// Exact mean when available without simulation.
    pub fn exact_mean(&self, model: &ChainModel, n: usize) -> Option<Vec<f64>> {
        match self {
            FunctionalSpec::SumOfStates => model.sum_mean(n),
            _ => None,
        }
    }

    /// `f` of a stored row-major trajectory.
    pub fn eval_path(&self, path: &[f64], d: usize, p: NormIndex) -> Result<Vec<f64>> {
        match self {
            FunctionalSpec::SumOfStates => {
                let mut s = vec![0.0; d];
                for x in path.chunks(d) {
                    for (a, b) in s.iter_mut().zip(x) {
                        *a += b;
                    }
                }
                Ok(s)
            }
            FunctionalSpec::SumOfNorms => Ok(vec![path.chunks(d).map(|x| p.norm(x)).sum()]),
            FunctionalSpec::Custom { f, out_dim, label } => {
                let v = f(path, d);
                if v.len() != *out_dim {
                    return Err(invalid(
                        "functional",
                        format!("{label} returned {} values, expected {out_dim}", v.len()),
                    ));
                }
                Ok(v)
            }
        }
    }

    /// Simulates one path of length `n` from `rng` and returns `f`.
    pub fn sample<R: Rng + ?Sized>(&self, model: &ChainModel, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        match self {
            FunctionalSpec::SumOfStates => {
                let mut s = vec![0.0; model.d()];
                model.run_path(n, rng, |_, x| {
                    for (a, b) in s.iter_mut().zip(x) {
                        *a += b;
                    }
                })?;
                Ok(s)
            }
            FunctionalSpec::SumOfNorms => {
                let p = model.p();
                let mut s = 0.0;
                model.run_path(n, rng, |_, x| s += p.norm(x))?;
                Ok(vec![s])
            }
            FunctionalSpec::Custom { .. } => {
                let mut path = Vec::with_capacity(n * model.d());
                model.run_path(n, rng, |_, x| path.extend_from_slice(x))?;
                self.eval_path(&path, model.d(), model.p())
            }
        }
    }
}
