//! `(rho, n)`-energies of radial profiles and their sharp lower bounds.
//!
//! Every integral over an annulus has a radial integrand and is reduced to
//! one dimension: `integral_{A(1,R)} f(|x|) dx = omega_{n-1} integral_1^R f(t) t^(n-1) dt`.

use std::cell::Cell;

use serde::Serialize;

use crate::characteristic::elasticity_from_radius;
use crate::error::{domain, Error, Result};
use crate::metric::{inverted_metric, omega, Dimension, RadialMetric};
use crate::quad::{Integral, Quad};
use crate::radial::RadialSolution;
use crate::special::pow_half;

const QUAD: Quad = Quad {
    abs_tol: 1e-300,
    rel_tol: 1e-12,
    max_panels: 200_000,
};

/// Panels used when no knots are supplied.
const DEFAULT_PANELS: usize = 64;

/// `L(t, H, H') = rho(H) t^(n-1) (H'^2 + (n-1) H^2/t^2)^(n/2)`.
#[inline]
fn lagrangian(rho: &RadialMetric, n: Dimension, t: f64, h: f64, hdot: f64) -> f64 {
    let nm1 = n.as_f64() - 1.0;
    let q = h / t;
    rho.eval(h) * t.powi(n.as_i32() - 1) * pow_half(hdot * hdot + nm1 * q * q, n.as_i32())
}

fn geometric_knots(big_r: f64, panels: usize) -> Vec<f64> {
    let l = big_r.ln();
    (0..=panels)
        .map(|i| match i {
            0 => 1.0,
            _ if i == panels => big_r,
            _ => (l * i as f64 / panels as f64).exp(),
        })
        .collect()
}

/// `E[H] = omega_{n-1} integral_1^R L(t, H, H') dt` for an increasing
/// profile given as `t -> (H(t), H'(t))`.
pub fn radial_energy<P>(profile: P, rho: &RadialMetric, n: Dimension, big_r: f64) -> Result<Integral>
where
    P: Fn(f64) -> (f64, f64),
{
    if !(big_r > 1.0) {
        return Err(domain(format!("R must be > 1, got {big_r}")));
    }
    radial_energy_on(profile, rho, n, &geometric_knots(big_r, DEFAULT_PANELS))
}

/// [`radial_energy`] with a caller-supplied partition `1 = k_0 < ... < k_m = R`
/// (e.g. the knots of a piecewise profile).
pub fn radial_energy_on<P>(
    profile: P,
    rho: &RadialMetric,
    n: Dimension,
    knots: &[f64],
) -> Result<Integral>
where
    P: Fn(f64) -> (f64, f64),
{
    let decreasing = Cell::new(None);
    let r = QUAD.integrate_partitioned(
        |t| {
            let (h, hdot) = profile(t);
            if hdot < 0.0 && decreasing.get().is_none() {
                decreasing.set(Some(t));
            }
            lagrangian(rho, n, t, h, hdot)
        },
        knots,
    );
    if let Some(t) = decreasing.get() {
        return Err(domain(format!("profile is decreasing at t = {t}")));
    }
    Ok(r?.scale(omega(n)))
}

/// Energy of a solved profile, integrating the interpolant cell by cell.
pub fn solution_energy(sol: &RadialSolution) -> Result<Integral> {
    radial_energy_on(
        |t| (sol.eval(t), sol.deriv(t)),
        sol.metric(),
        sol.n(),
        sol.grid_t(),
    )
}

/// `omega_{n-1} integral_1^R rho(H) H^n (eta^2 + n - 1)^(n/2) dt/t`, with
/// `eta` taken from the characteristic equation at `H(t)`.
pub fn minimizer_energy(sol: &RadialSolution) -> Result<Integral> {
    let n = sol.n();
    let nm1 = n.as_f64() - 1.0;
    let k = n.as_i32();
    let knots: Vec<f64> = sol.grid_t().iter().map(|t| t.ln()).collect();
    let r = QUAD.integrate_partitioned(
        |x| {
            let h = sol.eval(x.exp());
            let e = sol.eta_at_radius(h);
            sol.metric().eval(h) * h.powi(k) * pow_half(e * e + nm1, k)
        },
        &knots,
    )?;
    Ok(r.scale(omega(n)))
}

/// Which pointwise inequality the lower bound comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundBranch {
    /// `c >= 0`: weight `B(tau) = n rho eta (eta^2 + n - 1)^((n-2)/2)`.
    CNonnegative,
    /// `c < 0`: weight `W(tau) = n rho (eta^2 + n - 1)^((n-2)/2) / eta`.
    CNonpositive,
}

/// The sharp lower bound `modulus_term + boundary_term` for the energy of
/// homeomorphisms `A(1, R) -> A(1, R_*)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerBound {
    pub lower_bound: f64,
    pub bound_branch: BoundBranch,
    pub modulus_term: f64,
    pub boundary_term: f64,
    pub quad_err: f64,
}

/// Energy of a solved map together with its lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyReport {
    pub total: f64,
    pub lower_bound: f64,
    pub bound_branch: BoundBranch,
    pub modulus_term: f64,
    pub boundary_term: f64,
    pub quad_err: f64,
}

/// `B` for `c >= 0`, `W` for `c < 0`, at image radius `tau`.
fn bound_weight(c: f64, tau: f64, rho: &RadialMetric, n: Dimension) -> Result<f64> {
    let e = elasticity_from_radius(tau, c, rho, n)?;
    let base = n.as_f64() * rho.eval(tau) * pow_half(e.zeta + n.as_f64() - 1.0, n.as_i32() - 2);
    Ok(if c >= 0.0 { base * e.eta } else { base / e.eta })
}

/// Lower bound for the energy of maps `A(1, R) -> A(1, R_*)` whose
/// characteristic constant is `c`. `eta` is recomputed from the
/// characteristic equation at every node.
pub fn lower_bound(
    c: f64,
    big_r: f64,
    r_star: f64,
    rho: &RadialMetric,
    n: Dimension,
) -> Result<LowerBound> {
    if !(big_r > 1.0 && r_star > 1.0) {
        return Err(domain("radii must exceed 1"));
    }
    let c_max = rho.eval(1.0);
    if c > c_max {
        return Err(Error::NitscheViolation {
            c,
            c_max,
            min_outer_image_radius: None,
        });
    }
    let nf = n.as_f64();
    let k = n.as_i32();
    let modulus = omega(n) * big_r.ln();
    let (branch, modulus_term) = if c >= 0.0 {
        (BoundBranch::CNonnegative, pow_half(nf - 1.0, k) * c * modulus)
    } else {
        (BoundBranch::CNonpositive, -c * pow_half(nf - 1.0, k - 2) * modulus)
    };
    let failure = Cell::new(false);
    let integral = QUAD.integrate(
        |tau| match bound_weight(c, tau, rho, n) {
            Ok(w) => tau.powi(k - 1) * w,
            Err(_) => {
                failure.set(true);
                f64::NAN
            }
        },
        1.0,
        r_star,
    );
    if failure.get() {
        // surface the underlying error at a representative point
        bound_weight(c, r_star, rho, n)?;
    }
    let integral = integral?.scale(omega(n));
    Ok(LowerBound {
        lower_bound: modulus_term + integral.value,
        bound_branch: branch,
        modulus_term,
        boundary_term: integral.value,
        quad_err: integral.abs_err,
    })
}

/// Energy of the solved map together with the lower bound for its class.
pub fn energy_report(sol: &RadialSolution) -> Result<EnergyReport> {
    let total = solution_energy(sol)?;
    let lb = lower_bound(
        sol.c(),
        sol.outer_radius(),
        sol.image_outer_radius(),
        sol.metric(),
        sol.n(),
    )?;
    Ok(EnergyReport {
        total: total.value,
        lower_bound: lb.lower_bound,
        bound_branch: lb.bound_branch,
        modulus_term: lb.modulus_term,
        boundary_term: lb.boundary_term,
        quad_err: total.abs_err + lb.quad_err,
    })
}

/// Values of the three free Lagrangians for a radial map, with the values
/// they must take.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FreeLagrangians {
    /// `integral w(|h|) |h_N| |h_T|^(n-1)`.
    pub weighted: f64,
    /// `omega_{n-1} integral_1^{R_*} tau^(n-1) w(tau) dtau`.
    pub weighted_expected: f64,
    /// `integral |h_N| / (|h| |x|^(n-1))`.
    pub normal: f64,
    /// `Mod A(1, R_*)`.
    pub normal_expected: f64,
    /// `integral |h_T|^(n-1) / (|h|^(n-1) |x|)`.
    pub tangential: f64,
    /// `Mod A(1, R)`.
    pub tangential_expected: f64,
}

/// Free-Lagrangian integrals of the solved map. `weight` defaults to the
/// lower-bound weight (`B` for `c >= 0`, `W` for `c < 0`).
pub fn free_lagrangians_radial(
    sol: &RadialSolution,
    weight: Option<&dyn Fn(f64) -> f64>,
) -> Result<FreeLagrangians> {
    let n = sol.n();
    let k = n.as_i32();
    let (c, rho) = (sol.c(), sol.metric());
    let default_weight = |tau: f64| bound_weight(c, tau, rho, n).unwrap_or(f64::NAN);
    let w: &dyn Fn(f64) -> f64 = weight.unwrap_or(&default_weight);
    let om = omega(n);
    let knots = sol.grid_t();

    // |h_N| = H', |h_T| = H/t; the volume element contributes t^(n-1)
    let weighted = QUAD.integrate_partitioned(
        |t| {
            let h = sol.eval(t);
            w(h) * sol.deriv(t) * h.powi(k - 1)
        },
        knots,
    )?;
    let normal = QUAD.integrate_partitioned(|t| sol.deriv(t) / sol.eval(t), knots)?;
    let tangential = QUAD.integrate_partitioned(
        |t| {
            let h = sol.eval(t);
            (h / t).powi(k - 1) / (h.powi(k - 1) * t) * t.powi(k - 1)
        },
        knots,
    )?;
    let expected = QUAD.integrate(|tau| tau.powi(k - 1) * w(tau), 1.0, sol.image_outer_radius())?;
    Ok(FreeLagrangians {
        weighted: om * weighted.value,
        weighted_expected: om * expected.value,
        normal: om * normal.value,
        normal_expected: om * sol.image_outer_radius().ln(),
        tangential: om * tangential.value,
        tangential_expected: om * sol.outer_radius().ln(),
    })
}

/// Inner distortion of the radial map with principal stretches
/// `(F', F/s, ..., F/s)` at radius `s`.
pub fn radial_inner_distortion(f: f64, f_dot: f64, s: f64, n: Dimension) -> Result<f64> {
    if !(f_dot > 0.0) || !(f > 0.0) || !(s > 0.0) {
        return Err(Error::DegenerateJacobian(format!(
            "radial stretches must be positive (F = {f}, F' = {f_dot}, s = {s})"
        )));
    }
    let nf = n.as_f64();
    let k = n.as_i32();
    let a = f / s;
    let num = pow_half(
        a.powi(2 * (k - 1)) + (nf - 1.0) * f_dot * f_dot * a.powi(2 * (k - 2)),
        k,
    );
    let jac = f_dot * a.powi(k - 1);
    Ok(num / (pow_half(nf, k) * jac.powi(k - 1)))
}

/// `n^(n/2) integral_{A(1,R_*)} rho(y) K_I[f, y] dy` for the inverse
/// `f = h_c^{-1}`; equals the energy of `h_c`.
pub fn distortion_energy(sol: &RadialSolution) -> Result<Integral> {
    let n = sol.n();
    let k = n.as_i32();
    let rho = sol.metric();
    let failure = Cell::new(None::<String>);
    let integrand = |s: f64, ln_s: f64| -> f64 {
        let eta = sol.eta_from_log(s, ln_s);
        let res = sol
            .inverse(s)
            .and_then(|f| radial_inner_distortion(f, f / (s * eta), s, n));
        match res {
            Ok(kd) => rho.eval(s) * kd * s.powi(k - 1),
            Err(e) => {
                failure.set(Some(e.to_string()));
                f64::NAN
            }
        }
    };
    let r_star = sol.image_outer_radius();
    let r = if sol.c() > 0.0 {
        // the integrand grows like 1/eta ~ (s - 1)^(-1/2) near s = 1 at c = c_max
        let delta = (0.5 * (r_star - 1.0)).min(0.1);
        let head = QUAD.integrate(
            |u| {
                let u2 = u * u;
                2.0 * u * integrand(1.0 + u2, u2.ln_1p())
            },
            0.0,
            delta.sqrt(),
        );
        let tail = QUAD.integrate(|s| integrand(s, s.ln()), 1.0 + delta, r_star);
        head.and_then(|h| {
            let t = tail?;
            Ok(Integral {
                value: h.value + t.value,
                abs_err: h.abs_err + t.abs_err,
                evals: h.evals + t.evals,
            })
        })
    } else {
        QUAD.integrate(|s| integrand(s, s.ln()), 1.0, r_star)
    };
    if let Some(msg) = failure.take() {
        return Err(Error::DegenerateJacobian(msg));
    }
    Ok(r?.scale(pow_half(n.as_f64(), k) * omega(n)))
}

/// Energies of `f = h_c` under `rho` and of `f~ = iota o h_c` under the
/// inverted metric, where `iota(y) = y/|y|^2`. Returned as `(E, E~)`.
pub fn inversion_energy_check(sol: &RadialSolution) -> Result<(f64, f64)> {
    let n = sol.n();
    let e = solution_energy(sol)?;
    let inv = inverted_metric(sol.metric(), n);
    // H~ = 1/H is decreasing, so integrate the Lagrangian directly
    let r = QUAD.integrate_partitioned(
        |t| {
            let h = sol.eval(t);
            let hd = sol.deriv(t);
            lagrangian(&inv, n, t, 1.0 / h, -hd / (h * h))
        },
        sol.grid_t(),
    )?;
    Ok((e.value, omega(n) * r.value))
}

/// The first integral `rho(H)(H^2 - t^2 H'^2)(H^2 + t^2 H'^2/(n-1))^((n-2)/2)`;
/// constant (equal to `c`) along solutions.
pub fn first_integral(h: f64, hdot: f64, t: f64, rho: &RadialMetric, n: Dimension) -> f64 {
    let a = h * h;
    let b = t * t * hdot * hdot;
    rho.eval(h) * (a - b) * pow_half(a + b / (n.as_f64() - 1.0), n.as_i32() - 2)
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
    fn identity_energy_closed_form() {
        let e = radial_energy(|t| (t, 1.0), &RadialMetric::unit(), dim(3), 2.0).unwrap();
        let expect = 28.0 * 3f64.sqrt() * PI;
        assert!((e.value - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn power_energy_closed_form() {
        let n = dim(4);
        let rho = RadialMetric::power(-4.0).unwrap();
        let a: f64 = 0.7;
        let e = radial_energy(|t| (t.powf(a), a * t.powf(a - 1.0)), &rho, n, 3.0).unwrap();
        let expect = omega(n) * (a * a + 3.0).powi(2) * 3f64.ln();
        assert!((e.value - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn thin_annulus_energy_vanishes() {
        let e = radial_energy(|t| (t, 1.0), &RadialMetric::unit(), dim(4), 1.0 + 1e-9).unwrap();
        assert!(e.value < 1e-6);
    }

    #[test]
    fn decreasing_profile_rejected() {
        let r = radial_energy(|t| (3.0 - t, -1.0), &RadialMetric::unit(), dim(3), 2.0);
        assert!(r.is_err());
    }

    #[test]
    fn minimizer_energy_matches_direct_energy() {
        let rho = RadialMetric::unit();
        for c in [-3.0, 0.0, 0.5, 1.0] {
            let sol = solve_profile(c, 2.0, &rho, dim(3), 256).unwrap();
            let a = solution_energy(&sol).unwrap().value;
            let b = minimizer_energy(&sol).unwrap().value;
            assert!((a - b).abs() < 1e-8 * a, "c={c}: {a} vs {b}");
        }
    }

    #[test]
    fn zero_constant_bound_is_identity_energy() {
        let n = dim(3);
        let lb = lower_bound(0.0, 2.0, 2.0, &RadialMetric::unit(), n).unwrap();
        let e = 28.0 * 3f64.sqrt() * PI;
        assert!((lb.lower_bound - e).abs() < 1e-11 * e);
        assert_eq!(lb.modulus_term, 0.0);
    }

    #[test]
    fn bound_is_attained() {
        for (c, n) in [(-2.0, 3), (0.4, 4), (1.0, 3)] {
            let rho = RadialMetric::unit();
            let sol = solve_profile(c, 1.8, &rho, dim(n), 256).unwrap();
            let rep = energy_report(&sol).unwrap();
            assert!((rep.total - rep.lower_bound).abs() < 1e-8 * rep.total, "{rep:?}");
        }
    }

    #[test]
    fn free_lagrangian_equalities() {
        let sol = solve_profile(-1.0, 2.0, &RadialMetric::unit(), dim(3), 256).unwrap();
        let fl = free_lagrangians_radial(&sol, None).unwrap();
        assert!((fl.weighted - fl.weighted_expected).abs() < 1e-9 * fl.weighted_expected);
        assert!((fl.normal - fl.normal_expected).abs() < 1e-9 * fl.normal_expected);
        assert!((fl.tangential - fl.tangential_expected).abs() < 1e-9 * fl.tangential_expected);
    }

    #[test]
    fn inner_distortion_examples() {
        assert!((radial_inner_distortion(1.5, 1.0, 1.5, dim(4)).unwrap() - 1.0).abs() < 1e-15);
        let k = radial_inner_distortion(1.0, 2.0, 1.0, dim(3)).unwrap();
        assert!((k - 27.0 / (3f64.powf(1.5) * 4.0)).abs() < 1e-14);
        assert!(radial_inner_distortion(1.0, 0.0, 1.0, dim(3)).is_err());
    }

    #[test]
    fn distortion_identity() {
        let sol = solve_profile(0.6, 2.0, &RadialMetric::unit(), dim(3), 128).unwrap();
        let e = solution_energy(&sol).unwrap().value;
        let d = distortion_energy(&sol).unwrap().value;
        assert!((e - d).abs() < 1e-8 * e, "{e} vs {d}");
    }

    #[test]
    fn inversion_invariance() {
        let rho = RadialMetric::unit();
        let sol = solve_profile(0.0, 2.0, &rho, dim(3), 64).unwrap();
        let (e, et) = inversion_energy_check(&sol).unwrap();
        let expect = omega(dim(3)) * 3f64.powf(1.5) * 7.0 / 3.0;
        assert!((e - expect).abs() < 1e-11 * e);
        assert!((et - e).abs() < 1e-11 * e);
    }

    #[test]
    fn first_integral_examples() {
        let rho = RadialMetric::unit();
        assert_eq!(first_integral(1.7, 1.0, 1.7, &rho, dim(3)), 0.0);
        let p = RadialMetric::power(-5.0).unwrap();
        let a: f64 = 0.6;
        let t: f64 = 2.3;
        let v = first_integral(t.powf(a), a * t.powf(a - 1.0), t, &p, dim(5));
        assert!((v - phi(a * a, dim(5)).unwrap()).abs() < 1e-13);
    }
}
