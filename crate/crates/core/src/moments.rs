//! Moment bounds on `E‖S_n‖_q` from the constants `T_n(q)` and `V_n(q)`.

use crate::error::{BoundError, Result};

/// Marcinkiewicz–Zygmund type bound `d^{1/q} √T_n(q)`, `q ≥ 2`.
pub fn mz_moment_bound(tq: f64, d: usize, q: f64) -> Result<f64> {
    if !(q >= 2.0 && q.is_finite()) {
        return Err(BoundError::OrderOutOfRange { q, range: "[2, inf)" });
    }
    if !(tq >= 0.0) {
        return Err(crate::error::invalid("tq", format!("must be nonnegative, got {tq}")));
    }
    Ok((d as f64).powf(1.0 / q) * tq.sqrt())
}

/// von Bahr–Esseen type bound `(d V_n(q))^{1/q}`, `q ∈ [1, 2]`.
pub fn vbe_moment_bound(vq: f64, d: usize, q: f64) -> Result<f64> {
    if !(1.0..=2.0).contains(&q) {
        return Err(BoundError::OrderOutOfRange { q, range: "[1, 2]" });
    }
    if !(vq >= 0.0) {
        return Err(crate::error::invalid("vq", format!("must be nonnegative, got {vq}")));
    }
    Ok((d as f64 * vq).powf(1.0 / q))
}
