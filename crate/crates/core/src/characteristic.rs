//! The characteristic function `Phi`, its inverse `Psi`, the normalized
//! constant `v_c`, elasticities, `kappa_n`, the admissible range of the
//! characteristic constant and the pointwise coefficient functions used by
//! the lower bounds.

use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{domain, Error, Result};
use crate::metric::{check_regular, Dimension, RadialMetric};
use crate::roots::bisect;
use crate::special::pow_half;

/// A lower bound that may be `-infinity`; kept symbolic so it never enters
/// arithmetic as a float infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Finite(f64),
    Unbounded,
}

impl Bound {
    pub fn finite(self) -> Option<f64> {
        match self {
            Bound::Finite(x) => Some(x),
            Bound::Unbounded => None,
        }
    }

    /// `x >= self`.
    pub fn below_or_eq(self, x: f64) -> bool {
        self.finite().map_or(true, |b| b <= x)
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Finite(x) => write!(f, "{x}"),
            Bound::Unbounded => f.write_str("-inf"),
        }
    }
}

/// Serialized as a number, or the string `"-inf"`.
impl Serialize for Bound {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Bound::Finite(x) => s.serialize_f64(*x),
            Bound::Unbounded => s.serialize_str("-inf"),
        }
    }
}

/// A characteristic constant together with its admissible range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CharConstant {
    pub c: f64,
    pub c_min: Bound,
    pub c_max: f64,
}

impl CharConstant {
    /// `c <= c_max` (a radial harmonic diffeomorphism exists).
    pub fn exists(&self) -> bool {
        self.c <= self.c_max
    }

    /// `c_min <= c <= c_max`, the range where the radial map is the minimizer.
    pub fn in_minimal_range(&self) -> bool {
        self.exists() && self.c_min.below_or_eq(self.c)
    }
}

/// Elasticity `eta = t H'/H` and `zeta = eta^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Elasticity {
    pub eta: f64,
    pub zeta: f64,
}

impl Elasticity {
    pub fn from_zeta(zeta: f64) -> Self {
        Elasticity {
            eta: zeta.sqrt(),
            zeta,
        }
    }
}

#[inline]
pub(crate) fn phi_raw(zeta: f64, n: Dimension) -> f64 {
    let nm1 = n.as_f64() - 1.0;
    (1.0 - zeta) * pow_half(1.0 + zeta / nm1, n.as_i32() - 2)
}

#[inline]
pub(crate) fn phi_prime_raw(zeta: f64, n: Dimension) -> f64 {
    let nf = n.as_f64();
    let k = n.as_i32();
    -0.5 * pow_half(nf - 1.0, 2 - k) * nf * (1.0 + zeta) * pow_half(nf - 1.0 + zeta, k - 4)
}

fn check_zeta(zeta: f64) -> Result<()> {
    if zeta >= 0.0 {
        Ok(())
    } else {
        Err(domain(format!("zeta must be nonnegative, got {zeta}")))
    }
}

/// `Phi(zeta) = (1 - zeta)(1 + zeta/(n-1))^((n-2)/2)`.
pub fn phi(zeta: f64, n: Dimension) -> Result<f64> {
    check_zeta(zeta)?;
    Ok(phi_raw(zeta, n))
}

/// `Phi'(zeta) = -(1/2)(n-1)^(1-n/2) n (1+zeta)(n-1+zeta)^((n-4)/2) < 0`.
pub fn phi_prime(zeta: f64, n: Dimension) -> Result<f64> {
    check_zeta(zeta)?;
    Ok(phi_prime_raw(zeta, n))
}

// Values of w this far above 1 are rounding noise in v_c at the critical
// constant and are treated as 1.
const W_SLACK: f64 = 1e-12;

/// `Psi = Phi^{-1}` on `(-inf, 1]`. Safeguarded Newton on a doubling bracket.
pub fn psi(w: f64, n: Dimension) -> Result<f64> {
    if w.is_nan() || w > 1.0 + W_SLACK {
        return Err(domain(format!("Psi is defined for w <= 1, got {w}")));
    }
    if w == f64::NEG_INFINITY {
        return Err(domain("Psi(-inf) is unbounded"));
    }
    let w = w.min(1.0);
    if w == 1.0 {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    // lo stays 0 while Phi(hi) == w so that Psi(0) starts exactly at 1
    loop {
        let f = phi_raw(hi, n);
        if f < w {
            break;
        }
        if f > w {
            lo = hi;
        }
        hi *= 2.0;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = phi_raw(x, n) - w;
        if f == 0.0 {
            return Ok(x);
        }
        if f > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let mut next = x - f / phi_prime_raw(x, n);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 2.0 * f64::EPSILON * x.abs() || hi - lo <= f64::EPSILON * hi {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::NoConvergence {
        what: "Psi inversion",
        iterations: 200,
        residual: (phi_raw(x, n) - w).abs(),
    })
}

/// `Psi(1 - gap)` for small `gap > 0` without forming `1 - gap`.
/// Solves `1 - Phi(zeta) = gap` with `1 - Phi` evaluated through `expm1`.
pub(crate) fn psi_gap(gap: f64, n: Dimension) -> Result<f64> {
    if gap.is_nan() || gap < 0.0 {
        return Err(domain(format!("gap must be nonnegative, got {gap}")));
    }
    if gap == 0.0 {
        return Ok(0.0);
    }
    if gap >= 0.5 {
        return psi(1.0 - gap, n);
    }
    let nf = n.as_f64();
    let half_k = 0.5 * (nf - 2.0);
    // 1 - Phi(z) = -expm1(ln(1 - z) + (n-2)/2 ln(1 + z/(n-1))), z < 1
    let g = |z: f64| -((-z).ln_1p() + half_k * (z / (nf - 1.0)).ln_1p()).exp_m1() - gap;
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut z = (2.0 * (nf - 1.0) / nf * gap).min(0.5);
    for _ in 0..100 {
        let f = g(z);
        if f == 0.0 {
            return Ok(z);
        }
        if f < 0.0 {
            lo = z;
        } else {
            hi = z;
        }
        let mut next = z + f / phi_prime_raw(z, n);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - z).abs() <= 2.0 * f64::EPSILON * z {
            return Ok(next);
        }
        z = next;
    }
    Ok(z)
}

/// `v_c(s) = c / (s^n rho(s))`.
pub fn v_c(s: f64, c: f64, rho: &RadialMetric, n: Dimension) -> Result<f64> {
    let c_max = rho.eval(1.0);
    if c > c_max {
        return Err(Error::NitscheViolation {
            c,
            c_max,
            min_outer_image_radius: None,
        });
    }
    Ok(v_c_raw(s, c, rho, n))
}

#[inline]
pub(crate) fn v_c_raw(s: f64, c: f64, rho: &RadialMetric, n: Dimension) -> f64 {
    c / (s.powi(n.as_i32()) * rho.eval(s))
}

/// `eta = sqrt(Psi(v_c(s)))`: the elasticity of the radial solution at image
/// radius `s`.
pub fn elasticity_from_radius(
    s: f64,
    c: f64,
    rho: &RadialMetric,
    n: Dimension,
) -> Result<Elasticity> {
    let v = v_c(s, c, rho, n)?;
    if v > 1.0 + W_SLACK {
        return Err(Error::NitscheViolation {
            c,
            c_max: rho.eval(1.0),
            min_outer_image_radius: None,
        });
    }
    Ok(Elasticity::from_zeta(psi(v, n)?))
}

fn kappa_equation(eta: f64, n: Dimension) -> f64 {
    let e2 = eta * eta;
    pow_half(n.as_f64() - 1.0 + e2, n.as_i32() - 2) * (e2 - 1.0) - eta.powi(n.as_i32())
}

/// `kappa_n`, the root of `(n-1+eta^2)^((n-2)/2)(eta^2-1) = eta^n` in
/// `[1, sqrt((n-1)/(n-3))]`. Unbounded for `n = 3`.
pub fn kappa(n: Dimension) -> Result<f64> {
    if n.get() == 3 {
        return Err(Error::Unbounded("kappa_3 is infinite".into()));
    }
    let nf = n.as_f64();
    let hi = ((nf - 1.0) / (nf - 3.0)).sqrt();
    bisect(|x| kappa_equation(x, n), 1.0, hi, 1e-16)
}

fn kappa_bound(n: Dimension) -> Bound {
    kappa(n).map_or(Bound::Unbounded, Bound::Finite)
}

/// `(c_min, c_max)` with `c_max = rho(1)` and `c_min = -rho(1) kappa_n^n`.
///
/// Regularity is checked on the metric's declared domain; a metric without
/// an upper radius is only checked locally at `s = 1`.
pub fn c_bounds(rho: &RadialMetric, n: Dimension) -> Result<(Bound, f64)> {
    let (_, upper) = rho.domain();
    match upper {
        Some(u) => check_regular(rho, n, u).into_result()?,
        None => {
            if rho.deriv(1.0) + n.as_f64() * rho.eval(1.0) < 0.0 {
                return Err(Error::NonRegularMetric { at: 1.0 });
            }
        }
    }
    Ok(c_range(rho, n))
}

/// `(c_min, c_max)` without the regularity check.
pub(crate) fn c_range(rho: &RadialMetric, n: Dimension) -> (Bound, f64) {
    let c_max = rho.eval(1.0);
    let c_min = match kappa_bound(n) {
        Bound::Finite(k) => Bound::Finite(-c_max * k.powi(n.as_i32())),
        Bound::Unbounded => Bound::Unbounded,
    };
    (c_min, c_max)
}

/// Characteristic constants strictly below this value make the radial map
/// non-minimal: `-(2 rho(R_*) R_*^n/(n-2)) ((n-2)/(n-3))^(n/2)`.
pub fn nonminimality_threshold(rho: &RadialMetric, n: Dimension, r_star: f64) -> Bound {
    if n.get() == 3 {
        return Bound::Unbounded;
    }
    let nf = n.as_f64();
    let k = n.as_i32();
    let lead = 2.0 * rho.eval(r_star) * r_star.powi(k) / (nf - 2.0);
    Bound::Finite(-lead * pow_half((nf - 2.0) / (nf - 3.0), k))
}

/// Coefficients `(a, b)` with `[u^2 + (n-1)v^2]^(n/2) >= a v^n + b u v^(n-1)`,
/// equality iff `u = sigma v`; `0 <= sigma <= 1`.
pub fn lemma36_coeffs(sigma: f64, n: Dimension) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&sigma) {
        return Err(domain(format!("sigma must lie in [0, 1], got {sigma}")));
    }
    let nf = n.as_f64();
    let base = pow_half(sigma * sigma + nf - 1.0, n.as_i32() - 2);
    Ok((
        (nf - 1.0) * base * (1.0 - sigma * sigma),
        nf * sigma * base,
    ))
}

/// `a(sigma) = (sigma^2+n-1)^((n-2)/2)(sigma^2-1)/sigma^n` without range checks.
pub fn lemma37_a(sigma: f64, n: Dimension) -> f64 {
    let nf = n.as_f64();
    pow_half(sigma * sigma + nf - 1.0, n.as_i32() - 2) * (sigma * sigma - 1.0)
        / sigma.powi(n.as_i32())
}

/// Coefficients `(a, b)` with `[u^2 + (n-1)v^2]^(n/2) >= a u^n + b u v^(n-1)`,
/// equality iff `u = sigma v`; `1 <= sigma < kappa_n` (no upper limit for n = 3).
pub fn lemma37_coeffs(sigma: f64, n: Dimension) -> Result<(f64, f64)> {
    if !(sigma >= 1.0 && sigma.is_finite()) {
        return Err(domain(format!("sigma must be finite and >= 1, got {sigma}")));
    }
    if let Ok(k) = kappa(n) {
        if sigma >= k {
            return Err(Error::Range(format!(
                "sigma = {sigma} reaches kappa_{n} = {k}, where a(sigma) = 1"
            )));
        }
    }
    let nf = n.as_f64();
    let b = nf * pow_half(sigma * sigma + nf - 1.0, n.as_i32() - 2) / sigma;
    Ok((lemma37_a(sigma, n), b))
}
