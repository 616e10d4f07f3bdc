//! Spherical homotheties of `S^(n-1)` and the perturbations
//! `h_lambda(x) = H(|x|) Phi^lambda(x/|x|)` of a radial solution.
//!
//! Energies along the family are computed as the excess over `lambda = 1`,
//! integrated directly: `cf^2 - 1` is formed without cancellation, so
//! second differences in `lambda` keep full relative accuracy.

use rayon::prelude::*;
use serde::Serialize;
use std::cell::Cell;

use crate::characteristic::{nonminimality_threshold, Bound};
use crate::energy::minimizer_energy;
use crate::error::{domain, Result};
use crate::metric::{sphere_area, Dimension};
use crate::quad::{Integral, Quad};
use crate::radial::RadialSolution;
use crate::special::pow_half;

use std::f64::consts::PI;

const INNER: Quad = Quad {
    abs_tol: 1e-300,
    rel_tol: 1e-13,
    max_panels: 2_000,
};

const OUTER: Quad = Quad {
    abs_tol: 1e-300,
    rel_tol: 1e-12,
    max_panels: 200_000,
};

/// Initial partition of `[1, R_*]` for the outer integral.
const IMAGE_PANELS: usize = 8;

/// Default number of geometric steps in a sweep.
pub const DEFAULT_STEPS: usize = 64;
/// Default upper end of a sweep.
pub const DEFAULT_LAMBDA_MAX: f64 = 1.5;
/// A witness must beat the baseline by this multiple of the error estimate.
pub const WITNESS_MARGIN: f64 = 10.0;

/// `2 atan(lambda tan(theta/2))`, written with `atan2` so both poles are fixed.
pub fn meridian_map(theta: f64, lambda: f64) -> f64 {
    let half = 0.5 * theta;
    2.0 * (lambda * half.sin()).atan2(half.cos())
}

/// `|D Phi^lambda| = 2 lambda / (1 + lambda^2 + (1 - lambda^2) cos theta)`.
pub fn conformal_factor(theta: f64, lambda: f64) -> f64 {
    let l2 = lambda * lambda;
    2.0 * lambda / (1.0 + l2 + (1.0 - l2) * theta.cos())
}

/// `cf^2 - 1` without cancellation near `lambda = 1`.
fn cf_sq_minus_one(theta: f64, lambda: f64) -> f64 {
    let l2 = lambda * lambda;
    let cos = theta.cos();
    let den = 1.0 + l2 + (1.0 - l2) * cos;
    let d = 1.0 - lambda;
    let cf_minus_one = -d * (d + (1.0 + lambda) * cos) / den;
    let cf = 2.0 * lambda / den;
    cf_minus_one * (cf + 1.0)
}

/// Image of the unit vector `zeta` under `Phi^lambda` with pole `e_axis`
/// (default: the last coordinate). Only the angle to the pole changes.
pub fn apply_homothety(zeta: &[f64], lambda: f64, axis: Option<usize>) -> Result<Vec<f64>> {
    let axis = axis.unwrap_or(zeta.len().saturating_sub(1));
    if zeta.len() < 2 || axis >= zeta.len() {
        return Err(domain("need a vector of length >= 2 and a valid axis"));
    }
    if !(lambda > 0.0) {
        return Err(domain(format!("lambda must be positive, got {lambda}")));
    }
    let norm = zeta.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(domain(format!("expected a unit vector, |zeta| = {norm}")));
    }
    let c = zeta[axis];
    let s = zeta
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != axis)
        .map(|(_, v)| v * v)
        .sum::<f64>()
        .sqrt();
    if s == 0.0 {
        return Ok(zeta.to_vec());
    }
    let phi = meridian_map(s.atan2(c), lambda);
    let k = phi.sin() / s;
    Ok(zeta
        .iter()
        .enumerate()
        .map(|(i, &v)| if i == axis { phi.cos() } else { k * v })
        .collect())
}

/// `omega_{n-2} integral_0^pi cf^(n-1) sin^(n-2) theta d theta`, which equals
/// `omega_{n-1}` for every `lambda`.
pub fn jacobian_integral(lambda: f64, n: Dimension) -> Result<Integral> {
    let k = n.as_i32();
    let r = INNER.integrate(
        |th| conformal_factor(th, lambda).powi(k - 1) * th.sin().powi(k - 2),
        0.0,
        PI,
    )?;
    Ok(r.scale(sphere_area(n.get() - 2)?))
}

/// `integral_0^pi ([s2 + (n-1) cf^2]^(n/2) - [s2 + n - 1]^(n/2)) sin^(n-2)`.
fn excess_inner(s2: f64, lambda: f64, n: Dimension) -> Result<Integral> {
    let k = n.as_i32();
    let nm1 = n.as_f64() - 1.0;
    let base = s2 + nm1;
    let top = pow_half(base, k);
    let half_n = 0.5 * n.as_f64();
    INNER.integrate_cancelling(
        |th| {
            let r = nm1 * cf_sq_minus_one(th, lambda) / base;
            top * (half_n * r.ln_1p()).exp_m1() * th.sin().powi(k - 2)
        },
        &[0.0, PI],
    )
}

fn omega_ratio(n: Dimension) -> Result<f64> {
    Ok(sphere_area(n.get() - 2)? / sphere_area(n.get() - 1)?)
}

/// `phi(lambda) - phi(1)`.
pub fn phi_energy_excess(lambda: f64, sigma: f64, n: Dimension) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(domain(format!("lambda must be positive, got {lambda}")));
    }
    Ok(omega_ratio(n)? * excess_inner(sigma * sigma, lambda, n)?.value)
}

/// `(1/omega_{n-1}) integral_{S^(n-1)} [sigma^2 + (n-1)|D Phi^lambda|^2]^(n/2)`.
pub fn phi_energy(lambda: f64, sigma: f64, n: Dimension) -> Result<f64> {
    let top = pow_half(sigma * sigma + n.as_f64() - 1.0, n.as_i32());
    Ok(top + phi_energy_excess(lambda, sigma, n)?)
}

/// Closed form of `phi''(1)`:
/// `(n-1)(sigma^2+n-1)^((n-4)/2) (n - 1 - sigma^2 (n-3))`.
pub fn phi_second_derivative(sigma: f64, n: Dimension) -> f64 {
    let nf = n.as_f64();
    let s2 = sigma * sigma;
    (nf - 1.0) * pow_half(s2 + nf - 1.0, n.as_i32() - 4) * (nf - 1.0 - s2 * (nf - 3.0))
}

/// Richardson-extrapolated second difference of `phi` at `lambda = 1`
/// from steps `h` and `h/2`.
pub fn phi_second_difference(sigma: f64, n: Dimension, h: f64) -> Result<f64> {
    let d = |h: f64| -> Result<f64> {
        Ok((phi_energy_excess(1.0 + h, sigma, n)? + phi_energy_excess(1.0 - h, sigma, n)?) / (h * h))
    };
    let (coarse, fine) = (d(h)?, d(0.5 * h)?);
    Ok((4.0 * fine - coarse) / 3.0)
}

/// `E[h_lambda] - E[h_c]` with an error estimate that covers both the outer
/// quadrature and the propagated inner errors.
pub fn perturbed_energy_excess(sol: &RadialSolution, lambda: f64) -> Result<Integral> {
    if !(lambda > 0.0) {
        return Err(domain(format!("lambda must be positive, got {lambda}")));
    }
    if lambda == 1.0 {
        return Ok(Integral::zero());
    }
    let n = sol.n();
    let k = n.as_i32();
    let rho = sol.metric();
    let inner_err = Cell::new(0.0f64);
    let failure = Cell::new(None);
    let inner = |eta: f64, w: f64| match excess_inner(eta * eta, lambda, n) {
        Ok(r) => {
            inner_err.set(inner_err.get().max(w * r.abs_err));
            w * r.value
        }
        Err(err) => {
            let first = failure.take();
            failure.set(first.or(Some(err)));
            f64::NAN
        }
    };
    // dt/t = d tau / (tau eta): over the image radius the integrand comes
    // straight from the characteristic equation. Near the critical constant
    // eta(1) = 0 and the log t form is used instead.
    let (outer, span) = if sol.eta_at_radius(1.0) >= 1e-2 {
        let r_star = sol.image_outer_radius();
        let knots = geometric(r_star, IMAGE_PANELS);
        let outer = OUTER.integrate_cancelling(
            |tau| {
                let eta = sol.eta_at_radius(tau);
                inner(eta, rho.eval(tau) * tau.powi(k - 1) / eta)
            },
            &knots,
        );
        (outer, r_star - 1.0)
    } else {
        let knots: Vec<f64> = sol.grid_t().iter().map(|t| t.ln()).collect();
        let outer = OUTER.integrate_cancelling(
            |x| {
                let h = sol.eval(x.exp());
                inner(sol.eta_at_radius(h), rho.eval(h) * h.powi(k))
            },
            &knots,
        );
        (outer, knots[knots.len() - 1])
    };
    if let Some(err) = failure.take() {
        return Err(err);
    }
    let outer = outer?;
    Ok(Integral {
        value: outer.value,
        abs_err: outer.abs_err + inner_err.get() * span,
        evals: outer.evals,
    }
    .scale(sphere_area(n.get() - 2)?))
}

fn geometric(end: f64, panels: usize) -> Vec<f64> {
    let l = end.ln();
    (0..=panels)
        .map(|i| match i {
            0 => 1.0,
            _ if i == panels => end,
            _ => (l * i as f64 / panels as f64).exp(),
        })
        .collect()
}

/// `E[h_lambda] = omega_{n-2} integral rho(H) H^n integral_0^pi
/// [eta^2 + (n-1) cf^2]^(n/2) sin^(n-2) theta d theta dt/t`.
pub fn perturbed_energy(sol: &RadialSolution, lambda: f64) -> Result<Integral> {
    let base = minimizer_energy(sol)?;
    let ex = perturbed_energy_excess(sol, lambda)?;
    Ok(Integral {
        value: base.value + ex.value,
        abs_err: base.abs_err + ex.abs_err,
        evals: base.evals + ex.evals,
    })
}

/// Outcome of a sweep along the homothety family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    MinimalOnFamily,
    NonMinimal,
}

/// Pointwise bound `eta_H(t) > sqrt((n-1)/(n-3))` used by the certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EtaBound {
    /// `None` for `n = 3`, where the threshold is infinite.
    pub threshold: Option<f64>,
    pub min_eta: f64,
    pub holds: bool,
}

/// `E[h_lambda]` on a geometric grid `lambda_k = lambda_max^(k/steps)`,
/// `k = 0..=steps`, against the radial baseline `E[h_c]`.
#[derive(Debug, Clone, Serialize)]
pub struct HomothetySweep {
    pub n: Dimension,
    pub c: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    #[serde(rename = "R_star")]
    pub r_star: f64,
    pub lambda: Vec<f64>,
    pub energy: Vec<f64>,
    /// Error estimate of `energy[k] - baseline`.
    pub excess_err: Vec<f64>,
    pub baseline: f64,
    pub baseline_err: f64,
    pub verdict: Verdict,
    pub witness_lambda: Option<f64>,
    pub in_minimal_range: bool,
    pub below_nonminimality_threshold: bool,
    pub eta_bound: EtaBound,
}

impl HomothetySweep {
    /// Witness energy deficit `baseline - E[h_lambda*]`, if any.
    pub fn witness_deficit(&self) -> Option<f64> {
        let w = self.witness_lambda?;
        let k = self.lambda.iter().position(|&l| l == w)?;
        Some(self.baseline - self.energy[k])
    }

    /// Error estimate attached to the witness.
    pub fn witness_err(&self) -> Option<f64> {
        let w = self.witness_lambda?;
        let k = self.lambda.iter().position(|&l| l == w)?;
        Some(self.excess_err[k])
    }
}

/// Sweep `lambda` over `[1, lambda_max]` and declare the radial solution
/// non-minimal iff some `E[h_lambda]` falls below the baseline by more than
/// [`WITNESS_MARGIN`] times its error estimate. The witness is the deepest
/// such `lambda`.
pub fn nonminimality_certificate(
    sol: &RadialSolution,
    lambda_max: f64,
    steps: usize,
) -> Result<HomothetySweep> {
    if !(lambda_max > 1.0) || steps == 0 {
        return Err(domain("need lambda_max > 1 and at least one step"));
    }
    let lm = lambda_max.ln();
    let lambda: Vec<f64> = (0..=steps)
        .map(|k| match k {
            0 => 1.0,
            _ if k == steps => lambda_max,
            _ => (lm * k as f64 / steps as f64).exp(),
        })
        .collect();
    let excess: Vec<Integral> = lambda
        .par_iter()
        .map(|&l| perturbed_energy_excess(sol, l))
        .collect::<Result<_>>()?;
    let base = minimizer_energy(sol)?;

    let mut witness: Option<(f64, f64)> = None;
    for (l, ex) in lambda.iter().zip(&excess) {
        if ex.value < -WITNESS_MARGIN * ex.abs_err && witness.map_or(true, |(_, v)| ex.value < v) {
            witness = Some((*l, ex.value));
        }
    }

    let n = sol.n();
    let nf = n.as_f64();
    let threshold = (n.get() >= 4).then(|| ((nf - 1.0) / (nf - 3.0)).sqrt());
    let min_eta = sol.grid_eta().iter().copied().fold(f64::INFINITY, f64::min);
    let below = match nonminimality_threshold(sol.metric(), n, sol.image_outer_radius()) {
        Bound::Finite(v) => sol.c() < v,
        Bound::Unbounded => false,
    };

    Ok(HomothetySweep {
        n,
        c: sol.c(),
        big_r: sol.outer_radius(),
        r_star: sol.image_outer_radius(),
        energy: excess.iter().map(|e| base.value + e.value).collect(),
        excess_err: excess.iter().map(|e| e.abs_err).collect(),
        lambda,
        baseline: base.value,
        baseline_err: base.abs_err,
        verdict: if witness.is_some() {
            Verdict::NonMinimal
        } else {
            Verdict::MinimalOnFamily
        },
        witness_lambda: witness.map(|(l, _)| l),
        in_minimal_range: sol.in_minimal_range(),
        below_nonminimality_threshold: below,
        eta_bound: EtaBound {
            threshold,
            min_eta,
            holds: threshold.is_some_and(|t| min_eta > t),
        },
    })
}
