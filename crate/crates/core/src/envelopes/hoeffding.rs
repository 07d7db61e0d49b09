//! The Hoeffding-type function `H_n(x, v)` and its Bennett and Bernstein
//! relaxations.

/// `ln H_n(x, v)`; `−∞` when `x > n` (the indicator) or `v = 0 < x`.
pub fn ln_hoeffding_h(x: f64, v: f64, n: f64) -> f64 {
    assert!(x >= 0.0 && v >= 0.0 && n > 0.0);
    if x == 0.0 {
        return 0.0;
    }
    if x > n || v == 0.0 {
        return f64::NEG_INFINITY;
    }
    let v2 = v * v;
    let a = (x + v2) * (v2 / (x + v2)).ln();
    // (n − x) ln(n/(n − x)), equal to 0 at x = n under (+∞)^0 = 1.
    let b = if x == n {
        0.0
    } else {
        -(n - x) * (-x / n).ln_1p()
    };
    (n / (n + v2)) * (a + b)
}

pub fn hoeffding_h(x: f64, v: f64, n: f64) -> f64 {
    ln_hoeffding_h(x, v, n).exp()
}

/// Bennett's bound `(v²/(x + v²))^{x+v²} e^x`, in log form.
pub fn ln_bennett(x: f64, v: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if v == 0.0 {
        return f64::NEG_INFINITY;
    }
    let v2 = v * v;
    (x + v2) * (v2 / (x + v2)).ln() + x
}

pub fn bennett(x: f64, v: f64) -> f64 {
    ln_bennett(x, v).exp()
}

/// Bernstein's bound `exp{−x²/(2(v² + x/3))}`, in log form.
pub fn ln_bernstein(x: f64, v: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    -x * x / (2.0 * (v * v + x / 3.0))
}

pub fn bernstein(x: f64, v: f64) -> f64 {
    ln_bernstein(x, v).exp()
}
