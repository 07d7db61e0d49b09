//! Exact tails by enumerating every noise path of a finite-atom chain.

use super::tail::{GridPolicy, TailEstimate};
use crate::chains::{ChainModel, FunctionalSpec, Innovation};
use crate::error::{invalid, BoundError, Result};

/// Largest number of noise paths enumerated.
pub const PATH_LIMIT: u64 = 1 << 20;

/// Relative slack when comparing a path norm with a threshold, so that
/// norms equal to `u` up to rounding count as exceedances.
const TIE_TOL: f64 = 1e-12;

/// `(norm of f − E f, probability)` for every path, unsorted.
pub fn enumerate_paths(model: &ChainModel, f: &FunctionalSpec, n: usize) -> Result<Vec<(f64, f64)>> {
    if n < 2 {
        return Err(BoundError::HorizonTooSmall(n));
    }
    let atoms = model
        .noise()
        .atoms()
        .ok_or_else(|| invalid("noise", "exact enumeration needs a finite-atom noise law"))?;
    if !model.init_is_deterministic() {
        return Err(invalid("init", "exact enumeration needs a deterministic initial state"));
    }
    if !model.single_draw_noise() {
        return Err(invalid("model", "exact enumeration needs one noise draw per step"));
    }
    let paths = (atoms.len() as f64).powi(n as i32 - 1);
    if paths > PATH_LIMIT as f64 {
        return Err(BoundError::EnumerationTooLarge {
            paths: paths.min(u128::MAX as f64) as u128,
            limit: PATH_LIMIT as u128,
        });
    }
    let d = model.d();
    let mut x1 = vec![0.0; d];
    model.sample_init(&mut crate::rng::stream(0, 0), &mut x1);
    let mut path = vec![0.0; n * d];
    path[..d].copy_from_slice(&x1);
    let mut leaves: Vec<(Vec<f64>, f64)> = Vec::with_capacity(paths as usize);
    let inns: Vec<Innovation> = atoms
        .iter()
        .map(|(v, _)| Innovation {
            noise: v.clone(),
            batch: Vec::new(),
        })
        .collect();
    let probs: Vec<f64> = atoms.iter().map(|a| a.1).collect();
    // Depth-first over steps 2..=n with an explicit choice stack.
    let mut choice = vec![0usize; n + 1];
    let mut prob = vec![1.0f64; n + 1];
    let mut k = 2;
    loop {
        if k > n {
            leaves.push((f.eval_path(&path, d, model.p())?, prob[n]));
            // Backtrack to the deepest step with an untried atom.
            k = n;
            loop {
                choice[k] += 1;
                if choice[k] < inns.len() {
                    break;
                }
                choice[k] = 0;
                if k == 2 {
                    return finish(leaves, model);
                }
                k -= 1;
            }
        }
        let (prev, cur) = path.split_at_mut((k - 1) * d);
        model.step_into(k, &prev[(k - 2) * d..], &inns[choice[k]], &mut cur[..d])?;
        prob[k] = prob[k - 1] * probs[choice[k]];
        k += 1;
    }
}

fn finish(leaves: Vec<(Vec<f64>, f64)>, model: &ChainModel) -> Result<Vec<(f64, f64)>> {
    let m = leaves[0].0.len();
    let mut mean = vec![0.0; m];
    for (v, w) in &leaves {
        for (a, b) in mean.iter_mut().zip(v) {
            *a += w * b;
        }
    }
    let p = model.p();
    Ok(leaves
        .into_iter()
        .map(|(v, w)| {
            let c: Vec<f64> = v.iter().zip(&mean).map(|(a, b)| a - b).collect();
            (p.norm(&c), w)
        })
        .collect())
}

/// Exact `P(‖S_n‖_p ≥ u)` on the grid. Bands collapse onto the exact value.
pub fn enumerate_exact_tail(
    model: &ChainModel,
    f: &FunctionalSpec,
    n: usize,
    grid: &GridPolicy,
) -> Result<TailEstimate> {
    let mut leaves = enumerate_paths(model, f, n)?;
    leaves.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = leaves.iter().map(|l| l.1).sum();
    // Weighted median and maximum of the support.
    let mut acc = 0.0;
    let mut median = leaves.last().unwrap().0;
    for (v, w) in &leaves {
        acc += w;
        if acc >= 0.5 * total {
            median = *v;
            break;
        }
    }
    let max = leaves.last().unwrap().0;
    let u_grid = grid.resolve(median, max)?;
    // Suffix sums of probabilities in norm order.
    let mut suffix = vec![0.0; leaves.len() + 1];
    for i in (0..leaves.len()).rev() {
        suffix[i] = suffix[i + 1] + leaves[i].1;
    }
    let n_paths = leaves.len();
    let p_hat: Vec<f64> = u_grid
        .iter()
        .map(|&u| {
            let t = u * (1.0 - TIE_TOL) - TIE_TOL;
            let i = leaves.partition_point(|l| l.0 < t);
            suffix[i].min(1.0)
        })
        .collect();
    Ok(TailEstimate {
        counts: p_hat.iter().map(|q| (q * n_paths as f64).round() as u64).collect(),
        n_reps: n_paths,
        p_lcb: p_hat.clone(),
        p_ucb: p_hat.clone(),
        p_hat,
        u_grid,
        exact: true,
        n,
        out_dim: f.out_dim(model),
        p: model.p().value(),
        centering_margin: 0.0,
        max_norm: max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::{make_model, ExampleSpec, InitLaw, ModelSpec, NoiseSpec};

    fn two_atom_ar(rho: f64) -> ChainModel {
        make_model(ModelSpec {
            example: ExampleSpec::FunctionalAr {
                r: vec![vec![rho]],
                b: vec![0.0],
            },
            noise: NoiseSpec::TwoAtom { a: -1.0, b: 1.0, pr: 0.5 },
            init: InitLaw::Point { x: vec![0.0] },
            p: 2.0,
        })
        .unwrap()
    }

    #[test]
    fn two_paths_by_hand() {
        // S₂ = X₁ + X₂ = ε₂ with X₁ = 0, so |S₂| = 1 on both paths.
        let m = two_atom_ar(0.5);
        let t = enumerate_exact_tail(
            &m,
            &FunctionalSpec::SumOfStates,
            2,
            &GridPolicy::Explicit { u: vec![0.5, 1.0, 1.5] },
        )
        .unwrap();
        assert_eq!(t.p_hat, vec![1.0, 1.0, 0.0]);
    }

    #[test]
    fn total_probability_and_monotone_tail() {
        let m = two_atom_ar(0.5);
        let leaves = enumerate_paths(&m, &FunctionalSpec::SumOfStates, 12).unwrap();
        assert_eq!(leaves.len(), 2048);
        let total: f64 = leaves.iter().map(|l| l.1).sum();
        assert!((total - 1.0).abs() < 1e-14);
        let t = enumerate_exact_tail(&m, &FunctionalSpec::SumOfStates, 12, &GridPolicy::Auto { points: 30 }).unwrap();
        for w in t.p_hat.windows(2) {
            assert!(w[0] >= w[1]);
        }
        assert_eq!(*t.p_hat.last().unwrap(), 0.0);
    }

    #[test]
    fn exact_matches_variance_oracle() {
        let m = two_atom_ar(0.7);
        let n = 10;
        let leaves = enumerate_paths(&m, &FunctionalSpec::SumOfStates, n).unwrap();
        let var: f64 = leaves.iter().map(|(v, w)| w * v * v).sum();
        assert!((var - m.scalar_sum_variance(n).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn blowup_is_rejected() {
        let m = two_atom_ar(0.5);
        match enumerate_paths(&m, &FunctionalSpec::SumOfStates, 22) {
            Err(BoundError::EnumerationTooLarge { paths, .. }) => assert_eq!(paths, 1 << 21),
            other => panic!("{other:?}"),
        }
    }
}
