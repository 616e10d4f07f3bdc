//! Radial `(rho, n)`-harmonic profiles.
//!
//! For a characteristic constant `c <= rho(1)` the inverse profile is
//!
//! ```text
//! T_c(s) = exp( integral_1^s dy / (y sqrt(Psi(v_c(y)))) ),
//! ```
//!
//! and the profile is `H_c = T_c^{-1}`, mapping `[1, R]` onto `[1, R_*]`
//! with `R = T_c(R_*)`. `T_c` is built by quadrature on a geometric grid in
//! `s` and inverted by monotone interpolation in `(log t, log H)`.
//!
//! For `c > 0` the integrand is evaluated near `y = 1` in the variable
//! `u = sqrt(y - 1)`; at `c = rho(1)` it behaves like `(y - 1)^(-1/2)` there.

use rayon::prelude::*;
use serde::ser::{Serialize, SerializeStruct, Serializer};

use crate::characteristic::{c_range, psi, psi_gap, v_c_raw, CharConstant, Elasticity};
use crate::error::{domain, Error, Result};
use crate::interp::MonotoneHermite;
use crate::metric::{check_regular, Dimension, RadialMetric};
use crate::quad::{Integral, Quad};
use crate::roots::brent;

/// Tolerances for every `log T_c` quadrature.
const QUAD: Quad = Quad {
    abs_tol: 1e-15,
    rel_tol: 1e-13,
    max_panels: 20_000,
};

/// Default number of grid nodes in `s`.
pub const DEFAULT_GRID: usize = 1024;

/// Node budget for refinement, as a multiple of the requested grid size.
const REFINE_CAP: usize = 8;

/// Evaluates `zeta(y) = Psi(v_c(y))` and the `log T_c` integrands.
#[derive(Clone, Copy)]
pub(crate) struct Kernel<'a> {
    pub c: f64,
    pub rho: &'a RadialMetric,
    pub n: Dimension,
    critical: bool,
    // lim_{u -> 0} 2u / sqrt(zeta(1 + u^2)) in the critical case
    critical_limit: f64,
}

impl<'a> Kernel<'a> {
    pub fn new(c: f64, rho: &'a RadialMetric, n: Dimension) -> Result<Self> {
        if !c.is_finite() {
            return Err(domain(format!("characteristic constant must be finite, got {c}")));
        }
        let c_max = rho.eval(1.0);
        if c > c_max {
            return Err(Error::NitscheViolation {
                c,
                c_max,
                min_outer_image_radius: None,
            });
        }
        let critical = c == c_max;
        let mut critical_limit = f64::INFINITY;
        if critical {
            let nf = n.as_f64();
            // d/dy ln(rho(y) y^n) at y = 1
            let slope = nf + rho.deriv(1.0) / rho.eval(1.0);
            if slope <= 1e-12 * nf {
                return Err(Error::Divergent(format!(
                    "rho(s)s^n is stationary at s = 1, so T_c diverges at c = c_max = {c_max}"
                )));
            }
            critical_limit = 2.0 / (2.0 * (nf - 1.0) / nf * slope).sqrt();
        }
        Ok(Kernel {
            c,
            rho,
            n,
            critical,
            critical_limit,
        })
    }

    /// `Psi(v_c(y))`, given `ln y`.
    pub fn zeta(&self, y: f64, ln_y: f64) -> f64 {
        if self.c == 0.0 {
            return 1.0;
        }
        if self.critical {
            let e = self.n.as_f64() * ln_y + self.rho.ln_ratio_to_one(y, ln_y);
            let gap = (-(-e).exp_m1()).max(0.0);
            psi_gap(gap, self.n).unwrap_or(f64::NAN)
        } else {
            psi(v_c_raw(y, self.c, self.rho, self.n).min(1.0), self.n).unwrap_or(f64::NAN)
        }
    }

    pub fn eta(&self, y: f64) -> f64 {
        self.zeta(y, y.ln()).sqrt()
    }

    /// `d log T / d log y` as a function of `x = log y`.
    fn in_log(&self, x: f64) -> f64 {
        1.0 / self.zeta(x.exp(), x).sqrt()
    }

    /// `2u / (y sqrt(zeta(y)))` with `y = 1 + u^2`.
    fn in_sqrt(&self, u: f64) -> f64 {
        let u2 = u * u;
        let y = 1.0 + u2;
        let z = self.zeta(y, u2.ln_1p());
        if z > 0.0 {
            2.0 * u / (y * z.sqrt())
        } else if self.critical {
            self.critical_limit / y
        } else {
            f64::INFINITY
        }
    }

    /// `log T_c(b) - log T_c(a)` for `a, b >= 1`.
    pub fn log_t(&self, a: f64, b: f64) -> Result<Integral> {
        if a == b {
            return Ok(Integral::zero());
        }
        if self.c == 0.0 {
            return Ok(Integral {
                value: (b / a).ln(),
                abs_err: 0.0,
                evals: 0,
            });
        }
        if a > b {
            return Ok(self.log_t(b, a)?.scale(-1.0));
        }
        let result = if self.c > 0.0 && a == 1.0 {
            let delta = (0.5 * (b - 1.0)).min(0.1);
            let head = QUAD.integrate(|u| self.in_sqrt(u), 0.0, delta.sqrt());
            let tail = QUAD.integrate(|x| self.in_log(x), delta.ln_1p(), b.ln());
            head.and_then(|h| {
                let t = tail?;
                Ok(Integral {
                    value: h.value + t.value,
                    abs_err: h.abs_err + t.abs_err,
                    evals: h.evals + t.evals,
                })
            })
        } else {
            QUAD.integrate(|x| self.in_log(x), a.ln(), b.ln())
        };
        result.map_err(|e| match e {
            Error::Quadrature { value, .. } if !value.is_finite() => Error::Divergent(format!(
                "log T_c is infinite on [{a}, {b}] for c = {}",
                self.c
            )),
            other => other,
        })
    }
}

fn check_radius(name: &str, r: f64) -> Result<()> {
    if r > 1.0 && r.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("{name} must be finite and > 1, got {r}")))
    }
}

fn require_regular(rho: &RadialMetric, n: Dimension, r_star: f64) -> Result<()> {
    check_regular(rho, n, r_star).into_result()
}

/// `T_c(s)`, the radius in the domain annulus mapped onto radius `s`.
pub fn forward_map(s: f64, c: f64, rho: &RadialMetric, n: Dimension) -> Result<f64> {
    if !(s >= 1.0 && s.is_finite()) {
        return Err(domain(format!("s must be finite and >= 1, got {s}")));
    }
    if s > 1.0 {
        require_regular(rho, n, s)?;
    }
    let k = Kernel::new(c, rho, n)?;
    Ok(k.log_t(1.0, s)?.value.exp())
}

/// `R = T_c(R_*)`, increasing in `c`.
pub fn outer_radius(c: f64, r_star: f64, rho: &RadialMetric, n: Dimension) -> Result<f64> {
    check_radius("R_*", r_star)?;
    forward_map(r_star, c, rho, n)
}

/// A solved radial deformation `h_c(x) = H_c(|x|) x/|x|` of `A(1, R)` onto
/// `A(1, R_*)`.
#[derive(Debug, Clone)]
pub struct RadialSolution {
    n: Dimension,
    metric: RadialMetric,
    constant: CharConstant,
    big_r: f64,
    r_star: f64,
    s: Vec<f64>,
    t: Vec<f64>,
    eta: Vec<f64>,
    interp: MonotoneHermite,
    quad_err: f64,
}

/// Sample `T_c` on `m` geometric nodes of `[1, R_*]` (refined where `log t`
/// jumps) and build `H_c`.
pub fn solve_profile(
    c: f64,
    r_star: f64,
    rho: &RadialMetric,
    n: Dimension,
    m: usize,
) -> Result<RadialSolution> {
    if m < 16 {
        return Err(domain(format!("grid needs at least 16 nodes, got {m}")));
    }
    check_radius("R_*", r_star)?;
    require_regular(rho, n, r_star)?;
    let (c_min, c_max) = c_range(rho, n);
    let kernel = Kernel::new(c, rho, n)?;

    let ln_rs = r_star.ln();
    let s: Vec<f64> = (0..m)
        .map(|j| match j {
            0 => 1.0,
            _ if j == m - 1 => r_star,
            _ => (ln_rs * j as f64 / (m - 1) as f64).exp(),
        })
        .collect();
    let cells: Vec<Integral> = s
        .par_windows(2)
        .map(|w| kernel.log_t(w[0], w[1]))
        .collect::<Result<_>>()?;

    let ln_r: f64 = cells.iter().map(|i| i.value).sum();
    let target = 2.0 * ln_r.max(ln_rs) / (m - 1) as f64;
    let mut budget = REFINE_CAP * m - m;
    let mut nodes = Vec::with_capacity(m);
    let mut steps = Vec::with_capacity(m);
    nodes.push(1.0);
    for (w, cell) in s.windows(2).zip(&cells) {
        refine(&kernel, w[0], w[1], *cell, target, &mut budget, &mut nodes, &mut steps)?;
    }

    let mut t = Vec::with_capacity(nodes.len());
    let mut ln_t = Vec::with_capacity(nodes.len());
    let mut acc = 0.0;
    let mut quad_err = 0.0;
    t.push(1.0);
    ln_t.push(0.0);
    for st in &steps {
        acc += st.value;
        quad_err += st.abs_err;
        ln_t.push(acc);
        t.push(acc.exp());
    }
    for w in ln_t.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::NoConvergence {
                what: "strictly increasing profile grid",
                iterations: 0,
                residual: w[1] - w[0],
            });
        }
    }
    let eta: Vec<f64> = nodes.iter().map(|&y| kernel.eta(y)).collect();
    let ln_s: Vec<f64> = nodes.iter().map(|y| y.ln()).collect();
    let big_r = *t.last().expect("non-empty grid");
    let interp = MonotoneHermite::new(ln_t, ln_s, eta.clone());

    Ok(RadialSolution {
        n,
        metric: rho.clone(),
        constant: CharConstant { c, c_min, c_max },
        big_r,
        r_star,
        s: nodes,
        t,
        eta,
        interp,
        quad_err,
    })
}

#[allow(clippy::too_many_arguments)]
fn refine(
    kernel: &Kernel,
    a: f64,
    b: f64,
    cell: Integral,
    target: f64,
    budget: &mut usize,
    nodes: &mut Vec<f64>,
    steps: &mut Vec<Integral>,
) -> Result<()> {
    if cell.value <= target || *budget == 0 {
        nodes.push(b);
        steps.push(cell);
        return Ok(());
    }
    // near the singular end log t grows like sqrt(s - 1); split evenly in that
    let mid = if a == 1.0 && kernel.c > 0.0 {
        1.0 + 0.25 * (b - 1.0)
    } else {
        0.5 * (a + b)
    };
    if !(mid > a && mid < b) {
        nodes.push(b);
        steps.push(cell);
        return Ok(());
    }
    *budget -= 1;
    let left = kernel.log_t(a, mid)?;
    let right = kernel.log_t(mid, b)?;
    refine(kernel, a, mid, left, target, budget, nodes, steps)?;
    refine(kernel, mid, b, right, target, budget, nodes, steps)
}

impl RadialSolution {
    pub fn n(&self) -> Dimension {
        self.n
    }

    pub fn metric(&self) -> &RadialMetric {
        &self.metric
    }

    pub fn c(&self) -> f64 {
        self.constant.c
    }

    pub fn char_constant(&self) -> CharConstant {
        self.constant
    }

    /// Whether `c_min <= c <= c_max`.
    pub fn in_minimal_range(&self) -> bool {
        self.constant.in_minimal_range()
    }

    /// Outer radius `R` of the domain annulus.
    pub fn outer_radius(&self) -> f64 {
        self.big_r
    }

    /// Outer radius `R_*` of the image annulus.
    pub fn image_outer_radius(&self) -> f64 {
        self.r_star
    }

    /// Grid radii `t_i` in the domain.
    pub fn grid_t(&self) -> &[f64] {
        &self.t
    }

    /// Grid values `H(t_i)`.
    pub fn grid_h(&self) -> &[f64] {
        &self.s
    }

    /// Elasticities at the grid nodes.
    pub fn grid_eta(&self) -> &[f64] {
        &self.eta
    }

    /// Summed quadrature error estimate of `log t` over the grid.
    pub fn quad_err(&self) -> f64 {
        self.quad_err
    }

    pub(crate) fn kernel(&self) -> Kernel<'_> {
        Kernel::new(self.constant.c, &self.metric, self.n).expect("validated at construction")
    }

    /// `H_c(t)`; clamped to `[1, R]`.
    pub fn eval(&self, t: f64) -> f64 {
        if t <= 1.0 {
            return 1.0;
        }
        if t >= self.big_r {
            return self.r_star;
        }
        self.interp.eval(t.ln()).0.exp()
    }

    /// `H_c'(t)` from the interpolant.
    pub fn deriv(&self, t: f64) -> f64 {
        let t = t.clamp(1.0, self.big_r);
        let (y, dy) = self.interp.eval(t.ln());
        y.exp() * dy / t
    }

    /// `eta_H(t) = sqrt(Psi(v_c(H_c(t))))`.
    pub fn elasticity(&self, t: f64) -> Result<Elasticity> {
        let slack = 1e-12 * self.big_r;
        if !(t >= 1.0 - slack && t <= self.big_r + slack) {
            return Err(domain(format!("t = {t} outside [1, {}]", self.big_r)));
        }
        let h = self.eval(t);
        Ok(Elasticity::from_zeta(self.kernel().zeta(h, h.ln())))
    }

    /// Elasticity as a function of the image radius `s`.
    pub fn eta_at_radius(&self, s: f64) -> f64 {
        self.kernel().eta(s)
    }

    /// Elasticity at image radius `s` given `ln s` (accurate for `s` near 1).
    pub fn eta_from_log(&self, s: f64, ln_s: f64) -> f64 {
        self.kernel().zeta(s, ln_s).sqrt()
    }

    /// `F(s) = T_c(s)`, the inverse profile, by quadrature from the nearest node.
    pub fn inverse(&self, s: f64) -> Result<f64> {
        if !(s >= 1.0 && s <= self.r_star) {
            return Err(domain(format!("s = {s} outside [1, {}]", self.r_star)));
        }
        let j = self.s.partition_point(|&y| y <= s).saturating_sub(1);
        let j = if j + 1 < self.s.len() && (self.s[j + 1] / s).ln() < (s / self.s[j]).ln() {
            j + 1
        } else {
            j
        };
        let d = self.kernel().log_t(self.s[j], s)?;
        Ok(self.t[j] * d.value.exp())
    }

    /// `F'(s) = F(s) / (s eta(s))`.
    pub fn inverse_deriv(&self, s: f64) -> Result<f64> {
        let eta = self.eta_at_radius(s);
        if !(eta > 0.0) {
            return Err(Error::DegenerateJacobian(format!(
                "inverse profile has a vertical tangent at s = {s}"
            )));
        }
        Ok(self.inverse(s)? / (s * eta))
    }

    /// Largest relative gap between the interpolant derivative and
    /// `H eta / t` at cell midpoints, skipping two cells at each end.
    pub fn derivative_discrepancy(&self) -> f64 {
        let ln_t: &[f64] = self.interp.x();
        let k = self.kernel();
        let len = ln_t.len();
        if len < 6 {
            return 0.0;
        }
        (2..len - 3)
            .map(|i| {
                let t = (0.5 * (ln_t[i] + ln_t[i + 1])).exp();
                let h = self.eval(t);
                let exact = h * k.eta(h) / t;
                ((self.deriv(t) - exact) / exact).abs()
            })
            .fold(0.0, f64::max)
    }
}

impl Serialize for RadialSolution {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = ser.serialize_struct("RadialSolution", 6)?;
        st.serialize_field("n", &self.n)?;
        st.serialize_field("metric", &self.metric)?;
        st.serialize_field("c", &self.constant.c)?;
        st.serialize_field("R", &self.big_r)?;
        st.serialize_field("R_star", &self.r_star)?;
        let grid: Vec<[f64; 2]> = self.t.iter().zip(&self.s).map(|(&t, &h)| [t, h]).collect();
        st.serialize_field("grid", &grid)?;
        st.end()
    }
}

/// `eta_H(t)` of a solved profile.
pub fn elasticity_profile(sol: &RadialSolution, t: f64) -> Result<Elasticity> {
    sol.elasticity(t)
}

/// The characteristic constant of the radial map `A(1, R) -> A(1, R_*)`.
///
/// Constants below `c_min` are returned (with `in_minimal_range() == false`),
/// not rejected. An infeasible pair gives `NitscheViolation` carrying the
/// smallest admissible `R_*`.
pub fn solve_c(big_r: f64, r_star: f64, rho: &RadialMetric, n: Dimension) -> Result<CharConstant> {
    check_radius("R", big_r)?;
    check_radius("R_*", r_star)?;
    require_regular(rho, n, r_star)?;
    let (c_min, c_max) = c_range(rho, n);
    let ln_r = big_r.ln();

    let mut failure: Option<Error> = None;
    let mut f = |c: f64| -> f64 {
        let k = match Kernel::new(c, rho, n) {
            Ok(k) => k,
            Err(Error::Divergent(_)) => return f64::INFINITY,
            Err(e) => {
                failure.get_or_insert(e);
                return f64::NAN;
            }
        };
        match k.log_t(1.0, r_star) {
            Ok(i) => i.value - ln_r,
            Err(Error::Divergent(_)) => f64::INFINITY,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        }
    };
    let done = |c: f64| CharConstant { c, c_min, c_max };

    let f_max = f(c_max);
    if f_max.is_nan() {
        return Err(failure.take().expect("NaN only on failure"));
    }
    if f_max < 0.0 {
        return Err(Error::NitscheViolation {
            c: f64::INFINITY,
            c_max,
            min_outer_image_radius: nitsche_bound(big_r, rho, n).ok(),
        });
    }
    if f_max == 0.0 {
        return Ok(done(c_max));
    }
    let f0 = f(0.0);
    if f0 == 0.0 {
        return Ok(done(0.0));
    }
    let (lo, hi) = if f0 > 0.0 {
        let mut lo = c_max.min(0.0) - 1.0;
        let mut tries = 0;
        loop {
            let v = f(lo);
            if v.is_nan() {
                return Err(failure.take().expect("NaN only on failure"));
            }
            if v < 0.0 {
                break;
            }
            tries += 1;
            if tries > 1000 || !lo.is_finite() {
                return Err(Error::NoConvergence {
                    what: "lower bracket for the characteristic constant",
                    iterations: tries,
                    residual: v,
                });
            }
            lo *= 2.0;
        }
        (lo, 0.0)
    } else {
        (0.0, c_max)
    };
    let xtol = 1e-15 * (1.0 + lo.abs().max(hi.abs()));
    let c = brent(&mut f, lo, hi, xtol);
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(done(c?))
}

/// `H_{c_max}(R)`: the smallest `R_*` for which `A(1, R)` admits a radial
/// harmonic diffeomorphism onto `A(1, R_*)`. Equals 1 when `T_{c_max}`
/// diverges.
pub fn nitsche_bound(big_r: f64, rho: &RadialMetric, n: Dimension) -> Result<f64> {
    check_radius("R", big_r)?;
    match Kernel::new(rho.eval(1.0), rho, n) {
        Ok(k) => image_radius_with(&k, big_r, rho, n),
        Err(Error::Divergent(_)) => Ok(1.0),
        Err(e) => Err(e),
    }
}

/// `H_c(R)`, the outer image radius reached from `A(1, R)` with constant `c`.
pub fn image_radius(c: f64, big_r: f64, rho: &RadialMetric, n: Dimension) -> Result<f64> {
    check_radius("R", big_r)?;
    image_radius_with(&Kernel::new(c, rho, n)?, big_r, rho, n)
}

fn image_radius_with(kernel: &Kernel<'_>, big_r: f64, rho: &RadialMetric, n: Dimension) -> Result<f64> {
    let ln_r = big_r.ln();
    let g = |s: f64| match kernel.log_t(1.0, s) {
        Ok(i) => Ok(i.value - ln_r),
        Err(Error::Divergent(_)) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    };
    let upper = rho.domain().1.unwrap_or(f64::INFINITY);
    let mut hi = 2f64.min(upper);
    loop {
        require_regular(rho, n, hi)?;
        if g(hi)? >= 0.0 {
            break;
        }
        if hi >= upper || hi > 1e150 {
            return Err(Error::Range(format!(
                "T_c stays below R = {big_r} on the metric domain [1, {hi}]"
            )));
        }
        hi = (2.0 * hi).min(upper);
    }
    let mut failure = None;
    let s = brent(
        |s| {
            g(s).unwrap_or_else(|e| {
                failure.get_or_insert(e);
                f64::NAN
            })
        },
        1.0,
        hi,
        1e-15,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    s
}
