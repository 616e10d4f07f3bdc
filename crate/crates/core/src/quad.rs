//! Adaptive Gauss–Kronrod (10/21 point) quadrature.
//!
//! Global subdivision in the style of QUADPACK's QAG: the panel with the
//! largest error estimate is bisected until the summed estimate meets the
//! tolerance. Integrals with an inverse square-root singularity at the left
//! endpoint go through [`Quad::integrate_sqrt_left`], which removes it with
//! the substitution `y = a + u^2`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077208980292238,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

// Gauss weights for the odd-indexed Kronrod nodes XGK[1], XGK[3], ...
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

/// Result of a quadrature: value, error estimate and number of integrand calls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_err: f64,
    pub evals: usize,
}

impl Integral {
    pub fn zero() -> Self {
        Integral {
            value: 0.0,
            abs_err: 0.0,
            evals: 0,
        }
    }

    fn add(self, other: Integral) -> Integral {
        Integral {
            value: self.value + other.value,
            abs_err: self.abs_err + other.abs_err,
            evals: self.evals + other.evals,
        }
    }

    pub fn scale(self, k: f64) -> Integral {
        Integral {
            value: self.value * k,
            abs_err: self.abs_err * k.abs(),
            evals: self.evals,
        }
    }
}

/// One GK21 panel on `[a, b]`: (Kronrod value, error estimate, |f| integral).
pub fn gk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let abs_half = half.abs();

    let fc = f(center);
    let mut res_k = WGK[10] * fc;
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let value = res_k * half;
    res_abs *= abs_half;
    res_asc *= abs_half;
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (value, err, res_abs)
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
    abs: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Tolerances for adaptive integration. Converged when the summed error
/// estimate is at most `max(abs_tol, rel_tol * |value|)`.
#[derive(Debug, Clone, Copy)]
pub struct Quad {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for Quad {
    fn default() -> Self {
        Quad {
            abs_tol: 1e-300,
            rel_tol: 1e-12,
            max_panels: 20_000,
        }
    }
}

impl Quad {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Self {
        Quad {
            abs_tol,
            rel_tol,
            ..Quad::default()
        }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Result<Integral> {
        self.integrate_partitioned(f, &[a, b])
    }

    /// Integrate over `points[0]..points[last]`, starting from the given
    /// partition. Useful when the integrand has known kinks.
    pub fn integrate_partitioned<F: FnMut(f64) -> f64>(
        &self,
        f: F,
        points: &[f64],
    ) -> Result<Integral> {
        self.adapt(f, points, false)
    }

    /// Like [`Quad::integrate_partitioned`], but `rel_tol` is measured against
    /// `integral |f|`. For sign-changing integrands whose integral is much
    /// smaller than their magnitude.
    pub fn integrate_cancelling<F: FnMut(f64) -> f64>(
        &self,
        f: F,
        points: &[f64],
    ) -> Result<Integral> {
        self.adapt(f, points, true)
    }

    fn adapt<F: FnMut(f64) -> f64>(&self, mut f: F, points: &[f64], l1: bool) -> Result<Integral> {
        assert!(points.len() >= 2, "need at least one panel");
        let (lo, hi) = (points[0], points[points.len() - 1]);
        if lo == hi {
            return Ok(Integral::zero());
        }

        let mut heap = BinaryHeap::with_capacity(points.len() * 2);
        let mut total = 0.0;
        let mut total_err = 0.0;
        let mut total_abs = 0.0;
        let mut evals = 0;
        for w in points.windows(2) {
            if w[0] == w[1] {
                continue;
            }
            let (value, err, abs) = gk21(&mut f, w[0], w[1]);
            evals += 21;
            if !value.is_finite() {
                return Err(Error::Quadrature {
                    a: w[0],
                    b: w[1],
                    value,
                    abs_err: f64::INFINITY,
                });
            }
            total += value;
            total_err += err;
            total_abs += abs;
            heap.push(Panel {
                a: w[0],
                b: w[1],
                value,
                err,
                abs,
            });
        }

        let mut stuck = Vec::new();
        loop {
            let scale = if l1 { total_abs } else { total.abs() };
            let tol = self.abs_tol.max(self.rel_tol * scale);
            if total_err <= tol {
                break;
            }
            if heap.len() + stuck.len() >= self.max_panels {
                return Err(Error::Quadrature {
                    a: lo,
                    b: hi,
                    value: total,
                    abs_err: total_err,
                });
            }
            let Some(worst) = heap.pop() else {
                // every remaining panel is already at floating-point resolution
                break;
            };
            let mid = 0.5 * (worst.a + worst.b);
            if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
                stuck.push(worst);
                continue;
            }
            let (v1, e1, a1) = gk21(&mut f, worst.a, mid);
            let (v2, e2, a2) = gk21(&mut f, mid, worst.b);
            evals += 42;
            if !(v1.is_finite() && v2.is_finite()) {
                return Err(Error::Quadrature {
                    a: worst.a,
                    b: worst.b,
                    value: v1 + v2,
                    abs_err: f64::INFINITY,
                });
            }
            total += v1 + v2 - worst.value;
            total_err += e1 + e2 - worst.err;
            total_abs += a1 + a2 - worst.abs;
            heap.push(Panel {
                a: worst.a,
                b: mid,
                value: v1,
                err: e1,
                abs: a1,
            });
            heap.push(Panel {
                a: mid,
                b: worst.b,
                value: v2,
                err: e2,
                abs: a2,
            });
        }

        // Re-sum from the panels so the result does not carry the drift of
        // the running updates.
        let mut panels: Vec<Panel> = heap.into_vec();
        panels.extend(stuck);
        panels.sort_by(|p, q| p.a.total_cmp(&q.a));
        let value = panels.iter().map(|p| p.value).sum();
        let abs_err = panels.iter().map(|p| p.err).sum();
        Ok(Integral {
            value,
            abs_err,
            evals,
        })
    }

    /// Integrate `f` over `[a, b]` when `f(y)` may behave like `(y - a)^(-1/2)`
    /// near `a`. On `[a, a + delta]` the substitution `y = a + u^2` turns the
    /// integrand into the bounded `2 u f(a + u^2)`.
    pub fn integrate_sqrt_left<F: FnMut(f64) -> f64>(
        &self,
        mut f: F,
        a: f64,
        b: f64,
        delta: f64,
    ) -> Result<Integral> {
        if b <= a {
            return Ok(Integral::zero());
        }
        let split = (a + delta).min(b);
        let head = self.integrate(|u| 2.0 * u * f(a + u * u), 0.0, (split - a).sqrt())?;
        if split >= b {
            return Ok(head);
        }
        let tail = self.integrate(&mut f, split, b)?;
        Ok(head.add(tail))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panel_is_exact_for_degree_31() {
        let mut f = |x: f64| x.powi(30) + 3.0 * x.powi(7);
        let (v, _, _) = gk21(&mut f, -1.0, 1.0);
        assert!((v - 2.0 / 31.0).abs() < 1e-15);
    }

    #[test]
    fn smooth_integrals() {
        let q = Quad::default();
        let r = q.integrate(f64::exp, 0.0, 3.0).unwrap();
        assert!((r.value - (3f64.exp() - 1.0)).abs() < 1e-12 * r.value);
        let r = q.integrate(|x| 1.0 / (1.0 + 25.0 * x * x), -1.0, 1.0).unwrap();
        let exact = 2.0 * (5f64).atan() / 5.0;
        assert!((r.value - exact).abs() < 1e-13);
        assert!(r.abs_err < 1e-11);
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let q = Quad::default();
        let fwd = q.integrate(f64::sin, 0.0, 2.0).unwrap().value;
        let bwd = q.integrate(f64::sin, 2.0, 0.0).unwrap().value;
        assert!((fwd + bwd).abs() < 1e-15);
    }

    #[test]
    fn inverse_sqrt_singularity() {
        let q = Quad::default();
        // integral of 1/sqrt(y - 1) over [1, 5] is 4
        let r = q
            .integrate_sqrt_left(|y| 1.0 / (y - 1.0).sqrt(), 1.0, 5.0, 0.5)
            .unwrap();
        assert!((r.value - 4.0).abs() < 1e-12, "{}", r.value);
    }

    #[test]
    fn partition_matches_single_interval() {
        let q = Quad::default();
        let pts: Vec<f64> = (0..=50).map(|i| i as f64 * 0.1).collect();
        let a = q.integrate_partitioned(|x| x.cos() * x, &pts).unwrap();
        let b = q.integrate(|x| x.cos() * x, 0.0, 5.0).unwrap();
        assert!((a.value - b.value).abs() < 1e-13);
    }

    #[test]
    fn non_finite_integrand_is_an_error() {
        let q = Quad::default();
        assert!(q.integrate(|_| f64::NAN, 0.0, 1.0).is_err());
    }
}
