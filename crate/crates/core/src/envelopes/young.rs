//! The function `ℓ(t) = (t − ln t − 1) + t/(e^t − 1) + ln(1 − e^{−t})` and
//! its Young transform `ℓ*(x) = sup_{t>0}(xt − ℓ(t))`.

const SERIES_CUTOFF: f64 = 0.3;

pub fn ell(t: f64) -> f64 {
    assert!(t > 0.0, "ell needs t > 0, got {t}");
    if t < SERIES_CUTOFF {
        let t2 = t * t;
        return t2 * (1.0 / 8.0 + t2 * (-1.0 / 576.0 + t2 * (1.0 / 25920.0 - t2 / 1_075_200.0)));
    }
    // ln(1 − e^{−t}) − ln t = ln(−expm1(−t)/t)
    t - 1.0 + t / t.exp_m1() + (-(-t).exp_m1() / t).ln()
}

/// `ℓ′(t)`, increasing from 0 to 1 on `(0, ∞)`.
pub fn ell_prime(t: f64) -> f64 {
    if t < SERIES_CUTOFF {
        let t2 = t * t;
        return t * (0.25 + t2 * (-1.0 / 144.0 + t2 * (1.0 / 4320.0 - t2 / 134_400.0)));
    }
    if t > 40.0 {
        return 1.0 - 1.0 / t;
    }
    let em1 = t.exp_m1();
    1.0 - 1.0 / t + 1.0 / em1 + (em1 - t * (em1 + 1.0)) / (em1 * em1)
}

/// `(x² − 2x) ln(1 − x)`, a lower bound for `ℓ*(x)` on `[0, 1)`.
pub fn ell_star_floor(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return f64::INFINITY;
    }
    (x * x - 2.0 * x) * (-x).ln_1p()
}

/// `ℓ*(x)` for `x ≥ 0`; `+∞` for `x ≥ 1`. The returned value is never below
/// [`ell_star_floor`], so numerical error cannot loosen a bound built on it.
pub fn ell_star(x: f64) -> f64 {
    assert!(x >= 0.0, "ell_star needs x >= 0, got {x}");
    if x == 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return f64::INFINITY;
    }
    let mut hi = 1.0;
    while ell_prime(hi) < x && hi < 1e15 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ell_prime(mid) < x {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let t = 0.5 * (lo + hi);
    let numeric = if t > 0.0 { x * t - ell(t) } else { 0.0 };
    numeric.max(ell_star_floor(x))
}
