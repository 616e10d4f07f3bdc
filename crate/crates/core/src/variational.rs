//! Direct minimization of the discretized energy over increasing profiles
//! with pinned ends, and residual diagnostics for candidate solutions.
//!
//! The discrete energy is the midpoint rule on a geometric grid
//! `t_i = R^(i/m)`: each cell contributes `dt L(t_mid, H_mid, dH/dt)`, so
//! the Hessian is tridiagonal. Newton runs on `y_i = log H_i`.

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::metric::{omega, Dimension, MetricKind, RadialMetric};
use crate::radial::RadialSolution;
use crate::special::pow_half;

pub use crate::energy::first_integral;

/// An increasing profile sampled on `1 = t_0 < ... < t_m = R`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteProfile {
    t: Vec<f64>,
    h: Vec<f64>,
}

fn geometric_grid(big_r: f64, m: usize) -> Vec<f64> {
    let l = big_r.ln();
    (0..=m)
        .map(|i| match i {
            0 => 1.0,
            _ if i == m => big_r,
            _ => (l * i as f64 / m as f64).exp(),
        })
        .collect()
}

impl DiscreteProfile {
    /// Validate grid and values: `t` strictly increasing from 1, `H`
    /// finite, non-decreasing and starting at 1.
    pub fn new(t: Vec<f64>, h: Vec<f64>) -> Result<Self> {
        if t.len() != h.len() || t.len() < 2 {
            return Err(domain("grid and values must have equal length >= 2"));
        }
        if t[0] != 1.0 || h[0] != 1.0 {
            return Err(domain("profile must start at t = 1 with H = 1"));
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(domain("grid must be strictly increasing"));
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(domain("profile values must be finite"));
        }
        let p = DiscreteProfile { t, h };
        p.check_monotone()?;
        Ok(p)
    }

    /// `H_i = R_*^(log t_i / log R)` on the geometric grid with `m` cells.
    pub fn geometric(big_r: f64, r_star: f64, m: usize) -> Result<Self> {
        if !(big_r > 1.0 && r_star > 1.0) || m < 2 {
            return Err(domain("need R, R_* > 1 and at least 2 cells"));
        }
        let t = geometric_grid(big_r, m);
        let ratio = r_star.ln() / big_r.ln();
        let mut h: Vec<f64> = t.iter().map(|ti| (ratio * ti.ln()).exp()).collect();
        h[m] = r_star;
        Ok(DiscreteProfile { t, h })
    }

    /// Samples of a solved profile on the geometric grid with `m` cells.
    pub fn from_solution(sol: &RadialSolution, m: usize) -> Self {
        let t = geometric_grid(sol.outer_radius(), m);
        let h = t.iter().map(|&ti| sol.eval(ti)).collect();
        DiscreteProfile { t, h }
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn cells(&self) -> usize {
        self.t.len() - 1
    }

    fn check_monotone(&self) -> Result<()> {
        match self.h.windows(2).position(|w| !(w[1] >= w[0])) {
            Some(i) => Err(domain(format!("profile decreases after t = {}", self.t[i]))),
            None => Ok(()),
        }
    }
}

/// Second-order jet of `L(t, h, p) = rho(h) t^(n-1) (p^2 + (n-1) h^2/t^2)^(n/2)`.
struct Jet {
    lh: f64,
    lp: f64,
    lhh: f64,
    lhp: f64,
    lpp: f64,
}

fn jet(rho: &RadialMetric, n: Dimension, t: f64, h: f64, p: f64, second: bool) -> Jet {
    let k = n.as_i32();
    let nm1 = n.as_f64() - 1.0;
    let half_n = 0.5 * n.as_f64();
    let tt = t.powi(k - 1);
    let q = p * p + nm1 * h * h / (t * t);
    let (qh, qp) = (2.0 * nm1 * h / (t * t), 2.0 * p);
    let f = pow_half(q, k);
    let f1 = half_n * pow_half(q, k - 2);
    let (r0, r1) = (rho.eval(h), rho.deriv(h));
    let mut j = Jet {
        lh: tt * (r1 * f + r0 * f1 * qh),
        lp: tt * r0 * f1 * qp,
        lhh: 0.0,
        lhp: 0.0,
        lpp: 0.0,
    };
    if second {
        let f2 = half_n * (half_n - 1.0) * pow_half(q, k - 4);
        let r2 = rho.second_deriv(h);
        let qhh = 2.0 * nm1 / (t * t);
        j.lhh = tt * (r2 * f + 2.0 * r1 * f1 * qh + r0 * (f2 * qh * qh + f1 * qhh));
        j.lhp = tt * (r1 * f1 * qp + r0 * f2 * qh * qp);
        j.lpp = tt * r0 * (f2 * qp * qp + 2.0 * f1);
    }
    j
}

/// Midpoint-rule energy `omega_{n-1} sum dt L(t_mid, H_mid, dH/dt)`.
pub fn discrete_energy(p: &DiscreteProfile, rho: &RadialMetric, n: Dimension) -> Result<f64> {
    p.check_monotone()?;
    Ok(omega(n) * energy_sum(&p.t, &p.h, rho, n))
}

fn energy_sum(t: &[f64], h: &[f64], rho: &RadialMetric, n: Dimension) -> f64 {
    let k = n.as_i32();
    let nm1 = n.as_f64() - 1.0;
    t.windows(2)
        .zip(h.windows(2))
        .map(|(tw, hw)| {
            let dt = tw[1] - tw[0];
            let tm = 0.5 * (tw[0] + tw[1]);
            let hm = 0.5 * (hw[0] + hw[1]);
            let pm = (hw[1] - hw[0]) / dt;
            let q = pm * pm + nm1 * hm * hm / (tm * tm);
            dt * rho.eval(hm) * tm.powi(k - 1) * pow_half(q, k)
        })
        .sum()
}

/// Gradient of [`discrete_energy`] with respect to the interior values
/// `H_1 .. H_{m-1}`.
pub fn discrete_gradient(p: &DiscreteProfile, rho: &RadialMetric, n: Dimension) -> Result<Vec<f64>> {
    p.check_monotone()?;
    let d = derivatives(&p.t, &p.h, rho, n, false);
    Ok(d.grad.iter().zip(&p.h[1..]).map(|(g, h)| g / h).collect())
}

/// Gradient (and optionally tridiagonal Hessian) of the discrete energy in
/// the interior variables `y_i = log H_i`, `i = 1..m-1`, scaled by `omega`.
struct Derivatives {
    grad: Vec<f64>,
    diag: Vec<f64>,
    off: Vec<f64>,
}

fn derivatives(t: &[f64], h: &[f64], rho: &RadialMetric, n: Dimension, second: bool) -> Derivatives {
    let m = t.len() - 1;
    let mut gh = vec![0.0; m + 1];
    let mut hh_diag = vec![0.0; m + 1];
    let mut hh_off = vec![0.0; m];
    for c in 0..m {
        let dt = t[c + 1] - t[c];
        let tm = 0.5 * (t[c] + t[c + 1]);
        let hm = 0.5 * (h[c] + h[c + 1]);
        let pm = (h[c + 1] - h[c]) / dt;
        let j = jet(rho, n, tm, hm, pm, second);
        gh[c] += 0.5 * dt * j.lh - j.lp;
        gh[c + 1] += 0.5 * dt * j.lh + j.lp;
        if second {
            // d/dH_c = (1/2, -1/dt), d/dH_{c+1} = (1/2, 1/dt) in (h, p)
            let quad = |a: (f64, f64), b: (f64, f64)| {
                dt * (a.0 * b.0 * j.lhh + (a.0 * b.1 + a.1 * b.0) * j.lhp + a.1 * b.1 * j.lpp)
            };
            let ga = (0.5, -1.0 / dt);
            let gb = (0.5, 1.0 / dt);
            hh_diag[c] += quad(ga, ga);
            hh_diag[c + 1] += quad(gb, gb);
            hh_off[c] += quad(ga, gb);
        }
    }
    let om = omega(n);
    let grad: Vec<f64> = (1..m).map(|i| om * h[i] * gh[i]).collect();
    let (mut diag, mut off) = (Vec::new(), Vec::new());
    if second {
        diag = (1..m)
            .map(|i| om * (h[i] * h[i] * hh_diag[i] + h[i] * gh[i]))
            .collect();
        off = (1..m - 1).map(|i| om * h[i] * h[i + 1] * hh_off[i]).collect();
    }
    Derivatives { grad, diag, off }
}

/// Solve the symmetric tridiagonal system `(T + shift I) x = rhs`; `None`
/// if a pivot is not positive.
fn solve_tridiagonal(diag: &[f64], off: &[f64], shift: f64, rhs: &[f64]) -> Option<Vec<f64>> {
    let len = diag.len();
    let mut c = vec![0.0; len];
    let mut d = vec![0.0; len];
    let mut pivot = diag[0] + shift;
    if !(pivot > 0.0) {
        return None;
    }
    d[0] = rhs[0] / pivot;
    for i in 1..len {
        c[i - 1] = off[i - 1] / pivot;
        pivot = diag[i] + shift - off[i - 1] * c[i - 1];
        if !(pivot > 0.0) {
            return None;
        }
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / pivot;
    }
    for i in (0..len - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Some(d)
}

/// One optimizer step, for debugging traces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub energy: f64,
    pub grad_norm: f64,
}

/// Output of [`minimize_profile`].
#[derive(Debug, Clone, Serialize)]
pub struct Minimized {
    pub profile: DiscreteProfile,
    pub energy: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub trace: Vec<TraceEntry>,
}

const MAX_ITER: usize = 200;
const MAX_HALVINGS: usize = 60;

/// Minimize the discrete energy over increasing profiles with `H(1) = 1`,
/// `H(R) = R_*` on `m` geometric cells. Converged when the max-norm of the
/// gradient in `log H` is at most `tol (1 + |E|)`.
pub fn minimize_profile(
    big_r: f64,
    r_star: f64,
    rho: &RadialMetric,
    n: Dimension,
    m: usize,
    tol: f64,
) -> Result<Minimized> {
    if m < 4 {
        return Err(domain("need at least 4 cells"));
    }
    if !(tol > 0.0) {
        return Err(domain("tolerance must be positive"));
    }
    crate::metric::check_regular(rho, n, r_star).into_result()?;
    let start = DiscreteProfile::geometric(big_r, r_star, m)?;
    let t = start.t;
    let mut h = start.h;
    let om = omega(n);
    let mut energy = om * energy_sum(&t, &h, rho, n);
    let mut trace = Vec::new();

    for iteration in 0..=MAX_ITER {
        let d = derivatives(&t, &h, rho, n, true);
        let grad_norm = d.grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        trace.push(TraceEntry {
            iteration,
            energy,
            grad_norm,
        });
        if grad_norm <= tol * (1.0 + energy.abs()) {
            return Ok(Minimized {
                profile: DiscreteProfile { t, h },
                energy,
                iterations: iteration,
                grad_norm,
                trace,
            });
        }
        if iteration == MAX_ITER {
            return Err(Error::NoConvergence {
                what: "profile minimization",
                iterations: MAX_ITER,
                residual: grad_norm,
            });
        }

        let rhs: Vec<f64> = d.grad.iter().map(|g| -g).collect();
        let scale = d.diag.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut shift = 0.0;
        let step = loop {
            if let Some(s) = solve_tridiagonal(&d.diag, &d.off, shift, &rhs) {
                break s;
            }
            shift = if shift == 0.0 { 1e-10 * scale } else { 4.0 * shift };
            if shift > 1e12 * scale {
                return Err(Error::NoConvergence {
                    what: "positive definite Newton system",
                    iterations: iteration,
                    residual: grad_norm,
                });
            }
        };

        let mut alpha = 1.0;
        let mut accepted = false;
        let mut trial = h.clone();
        for _ in 0..=MAX_HALVINGS {
            for i in 1..m {
                trial[i] = h[i] * (alpha * step[i - 1]).exp();
            }
            if trial.windows(2).all(|w| w[1] > w[0]) {
                let e = om * energy_sum(&t, &trial, rho, n);
                if e <= energy + 4.0 * f64::EPSILON * energy.abs() {
                    energy = e;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence {
                what: "monotone descent step",
                iterations: iteration,
                residual: grad_norm,
            });
        }
        std::mem::swap(&mut h, &mut trial);
    }
    unreachable!("loop returns on the final iteration")
}

/// `L_H - d/dt L_H'` at interior nodes, relative to `max |L_H|`.
/// `H'` at nodes uses the three-point formula on the nonuniform grid;
/// `d/dt L_H'` is a difference of cell-midpoint values.
pub fn el_residual(p: &DiscreteProfile, rho: &RadialMetric, n: Dimension) -> Result<Vec<f64>> {
    p.check_monotone()?;
    let m = p.cells();
    if m < 32 {
        return Err(domain("residual needs at least 32 cells"));
    }
    let (t, h) = (&p.t, &p.h);
    let lp_mid: Vec<(f64, f64)> = (0..m)
        .map(|c| {
            let dt = t[c + 1] - t[c];
            let tm = 0.5 * (t[c] + t[c + 1]);
            let j = jet(rho, n, tm, 0.5 * (h[c] + h[c + 1]), (h[c + 1] - h[c]) / dt, false);
            (tm, j.lp)
        })
        .collect();
    let mut lh = Vec::with_capacity(m - 1);
    let mut res = Vec::with_capacity(m - 1);
    for i in 1..m {
        let (a, b) = (t[i] - t[i - 1], t[i + 1] - t[i]);
        let hdot = (-b / (a * (a + b))) * h[i - 1]
            + ((b - a) / (a * b)) * h[i]
            + (a / (b * (a + b))) * h[i + 1];
        let j = jet(rho, n, t[i], h[i], hdot, false);
        let dlp = (lp_mid[i].1 - lp_mid[i - 1].1) / (lp_mid[i].0 - lp_mid[i - 1].0);
        lh.push(j.lh);
        res.push(j.lh - dlp);
    }
    let scale = lh.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if scale == 0.0 {
        return Ok(res);
    }
    Ok(res.into_iter().map(|r| r / scale).collect())
}

/// `(t, L[H](t))` on `samples` points spread evenly in `log t` over `[1, R]`.
pub fn first_integral_samples(sol: &RadialSolution, samples: usize) -> Vec<(f64, f64)> {
    let l = sol.outer_radius().ln();
    let last = samples.max(2) - 1;
    (0..=last)
        .map(|i| {
            let t = (l * i as f64 / last as f64).exp().min(sol.outer_radius());
            (
                t,
                first_integral(sol.eval(t), sol.deriv(t), t, sol.metric(), sol.n()),
            )
        })
        .collect()
}

/// Residual of `(1+eta^2) eta' / ((1-eta^2)(n-1+eta^2)) = (n+nu)/(n t)` for a
/// solution under `rho(s) = s^nu`, with `eta'` by central differences.
pub fn elasticity_ode_residual(sol: &RadialSolution, nu: f64) -> Result<Vec<f64>> {
    let matches = match sol.metric().kind() {
        MetricKind::Power { nu: p, .. } => *p == nu,
        MetricKind::Constant { .. } => nu == 0.0,
        MetricKind::Custom { .. } => false,
    };
    if !matches {
        return Err(domain(format!("solution metric is not s^{nu}")));
    }
    if sol.c() == 0.0 {
        return Err(domain("c = 0 gives eta == 1, where the equation is 0/0"));
    }
    let nf = sol.n().as_f64();
    let big_r = sol.outer_radius();
    let mut out = Vec::new();
    for &t in sol.grid_t() {
        let h = 1e-4 * t;
        if t - h <= 1.0 || t + h >= big_r {
            continue;
        }
        let eta = |x: f64| sol.elasticity(x).map(|e| e.eta);
        let e = eta(t)?;
        let de = (eta(t + h)? - eta(t - h)?) / (2.0 * h);
        let e2 = e * e;
        let lhs = (1.0 + e2) * de / ((1.0 - e2) * (nf - 1.0 + e2));
        out.push(lhs - (nf + nu) / (nf * t));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characteristic::phi;
    use crate::radial::solve_profile;
    use std::f64::consts::PI;

    fn dim(n: u32) -> Dimension {
        Dimension::new(n).unwrap()
    }

    #[test]
    fn identity_discrete_energy() {
        let p = DiscreteProfile::geometric(2.0, 2.0, 4096).unwrap();
        let e = discrete_energy(&p, &RadialMetric::unit(), dim(3)).unwrap();
        let exact = 28.0 * 3f64.sqrt() * PI;
        assert!((e - exact).abs() < 1e-5 * exact);
    }

    #[test]
    fn midpoint_rule_is_second_order() {
        let n = dim(4);
        let rho = RadialMetric::power(-4.0).unwrap();
        let a: f64 = 1.7;
        let exact = omega(n) * (a * a + 3.0).powi(2) * 3f64.ln();
        let err = |m| {
            let p = DiscreteProfile::geometric(3.0, 3f64.powf(a), m).unwrap();
            (discrete_energy(&p, &rho, n).unwrap() - exact).abs()
        };
        let ratio = err(100) / err(200);
        assert!((ratio - 4.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn gradient_matches_difference_quotient() {
        let n = dim(3);
        let rho = RadialMetric::power(1.5).unwrap();
        let p = DiscreteProfile::geometric(2.0, 3.0, 20).unwrap();
        let mut h = p.h.clone();
        for (i, v) in h.iter_mut().enumerate().skip(1).take(19) {
            *v *= 1.0 + 0.01 * (i as f64).sin();
        }
        let d = derivatives(&p.t, &h, &rho, n, true);
        let e = |hh: &[f64]| omega(n) * energy_sum(&p.t, hh, &rho, n);
        for i in 1..20 {
            let step: f64 = 1e-6;
            let mut hp = h.clone();
            let mut hm = h.clone();
            hp[i] *= step.exp();
            hm[i] *= (-step).exp();
            let fd = (e(&hp) - e(&hm)) / (2.0 * step);
            assert!((fd - d.grad[i - 1]).abs() < 1e-6 * (1.0 + fd.abs()), "i={i}");
        }
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let n = dim(5);
        let rho = RadialMetric::power(0.5).unwrap();
        let p = DiscreteProfile::geometric(2.0, 1.5, 12).unwrap();
        let d = derivatives(&p.t, &p.h, &rho, n, true);
        for i in 1..11 {
            let step: f64 = 1e-6;
            let mut hp = p.h.clone();
            let mut hm = p.h.clone();
            hp[i] *= step.exp();
            hm[i] *= (-step).exp();
            let gp = derivatives(&p.t, &hp, &rho, n, false).grad;
            let gm = derivatives(&p.t, &hm, &rho, n, false).grad;
            let col: Vec<f64> = gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * step)).collect();
            let k = i - 1;
            assert!((col[k] - d.diag[k]).abs() < 1e-5 * d.diag[k].abs());
            if k + 1 < col.len() {
                assert!((col[k + 1] - d.off[k]).abs() < 1e-5 * (1.0 + d.off[k].abs()));
            }
        }
    }

    #[test]
    fn identity_is_the_minimizer_for_equal_radii() {
        let r = minimize_profile(2.0, 2.0, &RadialMetric::power(1.0).unwrap(), dim(3), 256, 1e-10)
            .unwrap();
        for (t, h) in r.profile.t().iter().zip(r.profile.h()) {
            assert!((t - h).abs() < 1e-5, "{t} {h}");
        }
    }

    #[test]
    fn recovers_power_profile() {
        let n = dim(3);
        let rho = RadialMetric::power(-3.0).unwrap();
        let r = minimize_profile(2.0, 4.0, &rho, n, 256, 1e-10).unwrap();
        let err = r
            .profile
            .t()
            .iter()
            .zip(r.profile.h())
            .fold(0.0f64, |a, (t, h)| a.max((h - t * t).abs()));
        assert!(err < 1e-4, "{err}");
        assert!(r.trace.windows(2).all(|w| w[1].energy <= w[0].energy * (1.0 + 1e-15)));
    }

    #[test]
    fn matches_radial_solution() {
        let n = dim(3);
        let rho = RadialMetric::unit();
        let sol = solve_profile(0.5, 2.0, &rho, n, 512).unwrap();
        let r = minimize_profile(sol.outer_radius(), 2.0, &rho, n, 512, 1e-10).unwrap();
        let err = r
            .profile
            .t()
            .iter()
            .zip(r.profile.h())
            .fold(0.0f64, |a, (&t, &h)| a.max((h - sol.eval(t)).abs()));
        assert!(err < 5e-4, "{err}");
    }

    #[test]
    fn residual_detects_non_solutions() {
        let n = dim(3);
        let rho = RadialMetric::unit();
        let id = DiscreteProfile::geometric(2.0, 2.0, 4096).unwrap();
        let r = el_residual(&id, &rho, n).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-6));
        let mut h = id.h().to_vec();
        for (i, v) in h.iter_mut().enumerate().skip(1).take(4095) {
            *v += 1e-3 * (i as f64 * 0.01).sin();
        }
        let bent = DiscreteProfile::new(id.t().to_vec(), h).unwrap();
        let r = el_residual(&bent, &rho, n).unwrap();
        assert!(r.iter().fold(0.0f64, |a, v| a.max(v.abs())) > 1e-2);
    }

    #[test]
    fn first_integral_is_constant_on_solutions() {
        let n = dim(4);
        let rho = RadialMetric::unit();
        let sol = solve_profile(-1.5, 2.0, &rho, n, 512).unwrap();
        for (_, l) in first_integral_samples(&sol, 512) {
            assert!((l + 1.5).abs() < 1e-7 * 1.5, "{l}");
        }
        let p = RadialMetric::power(-4.0).unwrap();
        let c = phi(0.36, n).unwrap();
        let sol = solve_profile(c, 1.5, &p, n, 64).unwrap();
        for (_, l) in first_integral_samples(&sol, 64) {
            assert!((l - c).abs() < 1e-12);
        }
    }

    #[test]
    fn elasticity_ode() {
        let sol = solve_profile(0.5, 2.0, &RadialMetric::unit(), dim(3), 256).unwrap();
        let r = elasticity_ode_residual(&sol, 0.0).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-6));
        let zero = solve_profile(0.0, 2.0, &RadialMetric::unit(), dim(3), 32).unwrap();
        assert!(elasticity_ode_residual(&zero, 0.0).is_err());
        assert!(elasticity_ode_residual(&sol, 1.0).is_err());
    }
}
