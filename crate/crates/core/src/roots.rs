//! Bracketed scalar root finding.

use crate::error::{domain, Error, Result};

fn same_sign(x: f64, y: f64) -> bool {
    (x > 0.0) == (y > 0.0)
}

/// Plain bisection on a sign-changing bracket, to an absolute width `xtol`.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, xtol: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if same_sign(fa, fb) {
        return Err(domain(format!("root not bracketed by [{lo}, {hi}]")));
    }
    let sa = fa > 0.0;
    for _ in 0..2000 {
        let m = 0.5 * (a + b);
        if (b - a).abs() <= xtol || m == a || m == b {
            return Ok(m);
        }
        let fm = f(m);
        if fm.is_nan() {
            return Err(domain(format!("function is NaN at {m}")));
        }
        if fm == 0.0 {
            return Ok(m);
        }
        if (fm > 0.0) == sa {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Brent's method. `f` may return `+-inf` (treated by sign, with bisection
/// steps); NaN is an error. Stops when the bracket is narrower than
/// `xtol + 4 eps |x|`.
pub fn brent<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, xtol: f64) -> Result<f64> {
    let mut a = lo;
    let mut b = hi;
    let mut fa = f(a);
    let mut fb = f(b);
    if fa.is_nan() || fb.is_nan() {
        return Err(domain("function is NaN at a bracket end"));
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if same_sign(fa, fb) {
        return Err(domain(format!("root not bracketed by [{lo}, {hi}]")));
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;

    const MAX_ITER: usize = 500;
    for _ in 0..MAX_ITER {
        if same_sign(fb, fc) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        let finite = fa.is_finite() && fb.is_finite() && fc.is_finite();
        if finite && e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
        if fb.is_nan() {
            return Err(domain(format!("function is NaN at {b}")));
        }
    }
    Err(Error::NoConvergence {
        what: "Brent root search",
        iterations: MAX_ITER,
        residual: fb.abs(),
    })
}
