//! Exact helpers for the half-integer powers and Gamma values that appear
//! throughout: every exponent here is `k/2` for an integer `k`.

use std::f64::consts::PI;

/// `x^(k/2)` for `x > 0`, via integer powers and at most one square root.
#[inline]
pub fn pow_half(x: f64, k: i32) -> f64 {
    debug_assert!(x >= 0.0, "pow_half of negative base {x}");
    if k % 2 == 0 {
        x.powi(k / 2)
    } else {
        x.powi((k - 1) / 2) * x.sqrt()
    }
}

/// `Gamma(k/2)` for `k >= 1`.
pub fn gamma_half(k: u32) -> f64 {
    assert!(k >= 1, "Gamma(0) is a pole");
    if k % 2 == 0 {
        (1..k / 2).fold(1.0, |acc, j| acc * j as f64)
    } else {
        (1..=(k - 1) / 2).fold(PI.sqrt(), |acc, j| acc * (j as f64 - 0.5))
    }
}
