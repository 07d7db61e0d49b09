//! Empirical check of the contraction and noise-Lipschitz conditions.

use super::model::{ChainModel, Innovation};
use crate::error::Result;
use crate::par::{try_map_range, Exec};
use crate::rng::{derive_seed, stream};

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionRow {
    pub n: usize,
    pub probe: usize,
    pub distance: f64,
    /// Mean of `d(F_n(x, ε), F_n(x′, ε)) / d(x, x′)` over the draws.
    pub mean_ratio: f64,
    pub se: f64,
    pub rho_n: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionReport {
    pub rows: Vec<ContractionRow>,
    /// `max [d(F_n(x, y), F_n(x, y′)) − τ_n δ(y, y′) − ξ_n]` over all draws.
    pub c2_residual: f64,
}

impl ContractionReport {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass) && self.c2_residual <= 1e-9
    }
}

/// Probe pairs `(x, x′)` are copies of `X_{n−1}` from two independent runs,
/// so they lie in the state space the chain actually visits.
pub fn verify_contraction(
    model: &ChainModel,
    steps: &[usize],
    probes: usize,
    draws: usize,
    seed: u64,
    exec: Exec,
) -> Result<ContractionReport> {
    let d = model.d();
    let p = model.p();
    let mut rows = Vec::new();
    let mut c2_residual = f64::NEG_INFINITY;
    for &n in steps {
        let (rho_n, tau_n, xi_n) = model.schedule().eval(n)?;
        let base = derive_seed(seed, &format!("contraction-{n}"));
        let results = try_map_range(exec, probes, |j| -> Result<(ContractionRow, f64)> {
            let mut rng = stream(base, j as u64);
            let mut x = vec![0.0; d];
            let mut xp = vec![0.0; d];
            model.run_path(n - 1, &mut rng, |_, s| x.copy_from_slice(s))?;
            model.run_path(n - 1, &mut rng, |_, s| xp.copy_from_slice(s))?;
            if p.distance(&x, &xp) == 0.0 {
                xp.iter_mut().for_each(|v| *v += 1e-3);
                if let Some(r) = model.projection_radius() {
                    let norm = xp.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if norm > r {
                        xp.iter_mut().for_each(|v| *v *= r / norm);
                    }
                }
            }
            let dist = p.distance(&x, &xp);
            let (mut a, mut b) = (vec![0.0; d], vec![0.0; d]);
            let (mut s, mut s2) = (0.0, 0.0);
            let mut resid = f64::NEG_INFINITY;
            let (mut inn, mut inn2) = (Innovation::default(), Innovation::default());
            for _ in 0..draws {
                model.sample_innovation(n, &mut rng, &mut inn);
                model.step_into(n, &x, &inn, &mut a)?;
                model.step_into(n, &xp, &inn, &mut b)?;
                let r = p.distance(&a, &b) / dist;
                s += r;
                s2 += r * r;
                model.sample_innovation(n, &mut rng, &mut inn2);
                model.step_into(n, &x, &inn2, &mut b)?;
                let lhs = p.distance(&a, &b);
                let rhs = tau_n * model.noise_distance(&inn, &inn2) + xi_n;
                resid = resid.max(lhs - rhs);
            }
            let m = s / draws as f64;
            let se = ((s2 / draws as f64 - m * m).max(0.0) / draws as f64).sqrt();
            Ok((
                ContractionRow {
                    n,
                    probe: j,
                    distance: dist,
                    mean_ratio: m,
                    se,
                    rho_n,
                    pass: m <= rho_n + 3.0 * se + 1e-12,
                },
                resid,
            ))
        })?;
        for (row, resid) in results {
            c2_residual = c2_residual.max(resid);
            rows.push(row);
        }
    }
    Ok(ContractionReport { rows, c2_residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::model::{make_model, ExampleSpec, InitLaw, ModelSpec};
    use crate::chains::noise::NoiseSpec;

    #[test]
    fn sgd_contracts_on_the_ball() {
        let m = make_model(ModelSpec {
            example: ExampleSpec::ProjectedSgd {
                curvatures: vec![1.0, 2.0, 1.5],
                centers: vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, -1.0]],
                batch: 2,
                gamma: 0.5,
                alpha: 0.5,
                radius: 2.0,
            },
            noise: NoiseSpec::Gaussian { sigma: 0.3, d: 2 },
            init: InitLaw::Point { x: vec![0.0, 0.0] },
            p: 2.0,
        })
        .unwrap();
        let rep = verify_contraction(&m, &[2, 10, 100], 8, 400, 1, Exec::Parallel).unwrap();
        assert!(rep.pass(), "{rep:?}");
    }

    #[test]
    fn linear_sa_ratio_is_deterministic() {
        let m = make_model(ModelSpec {
            example: ExampleSpec::LinearSa {
                a: vec![vec![2.0]],
                b: vec![1.0],
                gamma: 0.5,
                alpha: 0.5,
            },
            noise: NoiseSpec::Gaussian { sigma: 1.0, d: 1 },
            init: InitLaw::Point { x: vec![0.0] },
            p: 2.0,
        })
        .unwrap();
        let rep = verify_contraction(&m, &[4], 3, 50, 2, Exec::Sequential).unwrap();
        for r in &rep.rows {
            // |1 − 0.5·2/2| = 0.5 exactly.
            assert!((r.mean_ratio - 0.5).abs() < 1e-12);
            assert!(r.se < 1e-12);
        }
        assert!(rep.c2_residual <= 1e-12);
    }
}
