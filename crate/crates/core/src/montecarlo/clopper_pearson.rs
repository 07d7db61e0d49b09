//! One-sided Clopper–Pearson bounds for a binomial proportion.

use statrs::function::beta::beta_reg;

/// Confidence level of every band in the crate.
pub const LEVEL: f64 = 0.99;

/// `q`-quantile of `Beta(a, b)` by bisection on the regularised incomplete
/// beta function.
fn beta_quantile(a: f64, b: f64, q: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if beta_reg(a, b, mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Lower bound with `P(p < lcb) ≤ 1 − level`.
pub fn lower(k: u64, n: u64, level: f64) -> f64 {
    if k == 0 {
        0.0
    } else {
        beta_quantile(k as f64, (n - k + 1) as f64, 1.0 - level)
    }
}

/// Upper bound with `P(p > ucb) ≤ 1 − level`.
pub fn upper(k: u64, n: u64, level: f64) -> f64 {
    if k >= n {
        1.0
    } else {
        beta_quantile((k + 1) as f64, (n - k) as f64, level)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng;
    use rand_distr::Binomial;

    #[test]
    fn closed_forms_at_the_edges() {
        // k = n: lower = α^{1/n}; k = 0: upper = 1 − α^{1/n}.
        let n = 50;
        assert!((lower(n, n, 0.99) - 0.01f64.powf(1.0 / 50.0)).abs() < 1e-12);
        assert!((upper(0, n, 0.99) - (1.0 - 0.01f64.powf(1.0 / 50.0))).abs() < 1e-12);
        assert_eq!(lower(0, n, 0.99), 0.0);
        assert_eq!(upper(n, n, 0.99), 1.0);
    }

    #[test]
    fn bands_bracket_the_estimate() {
        for k in [1u64, 7, 500, 999] {
            let (l, u) = (lower(k, 1000, LEVEL), upper(k, 1000, LEVEL));
            let p = k as f64 / 1000.0;
            assert!(l <= p && p <= u, "k = {k}");
        }
    }

    #[test]
    fn coverage_by_simulation() {
        let mut rng = stream(42, 0);
        let trials = 4000;
        for &p in &[0.01, 0.1] {
            let n = 1000u64;
            let bin = Binomial::new(n, p).unwrap();
            let (mut miss_lo, mut miss_hi) = (0, 0);
            for _ in 0..trials {
                let k: u64 = rng.sample(bin);
                if lower(k, n, LEVEL) > p {
                    miss_lo += 1;
                }
                if upper(k, n, LEVEL) < p {
                    miss_hi += 1;
                }
            }
            assert!((miss_lo as f64) / (trials as f64) <= 0.015, "p = {p}: {miss_lo}");
            assert!((miss_hi as f64) / (trials as f64) <= 0.015, "p = {p}: {miss_hi}");
        }
    }
}
