//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Tolerances are the stated ones; nothing is loosened here.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;

use nharmonic::characteristic::{
    c_bounds, kappa, lemma36_coeffs, lemma37_coeffs, nonminimality_threshold, phi, Bound,
};
use nharmonic::energy::{
    distortion_energy, free_lagrangians_radial, inversion_energy_check, lower_bound,
    minimizer_energy, radial_energy, solution_energy,
};
use nharmonic::metric::{check_regular, sphere_area, Dimension, RadialMetric};
use nharmonic::radial::{outer_radius, solve_c, solve_profile, RadialSolution};
use nharmonic::spherical::{
    jacobian_integral, nonminimality_certificate, phi_energy, phi_energy_excess,
    phi_second_derivative, phi_second_difference, Verdict, DEFAULT_STEPS,
};
use nharmonic::variational::{first_integral_samples, minimize_profile, elasticity_ode_residual};
use nharmonic::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

const GRID: usize = 1024;

fn dim(n: u32) -> Dimension {
    Dimension::new(n).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn solve(c: f64, r_star: f64, rho: &RadialMetric, n: u32) -> Result<RadialSolution, String> {
    solve_profile(c, r_star, rho, dim(n), GRID).map_err(|e| format!("solve n={n} c={c}: {e}"))
}

fn first_integral_dev(sol: &RadialSolution) -> f64 {
    let c = sol.c();
    first_integral_samples(sol, 2 * GRID)
        .into_iter()
        .map(|(_, l)| (l - c).abs() / (1.0 + c.abs()))
        .fold(0.0, f64::max)
}

fn power_family() -> Outcome {
    let mut worst = [0.0f64; 3];
    for n in [3u32, 4, 5] {
        let rho = RadialMetric::power(-(n as f64)).unwrap();
        let om = sphere_area(n - 1).unwrap();
        for alpha in [0.3, 0.5, 2.0, 3.0] {
            for big_r in [2.0, std::f64::consts::E] {
                let r_star = f64::powf(big_r, alpha);
                let want_c = phi(alpha * alpha, dim(n)).unwrap();
                let c = solve_c(big_r, r_star, &rho, dim(n)).map_err(|e| e.to_string())?.c;
                worst[0] = worst[0].max((c - want_c).abs());
                let sol = solve(want_c, r_star, &rho, n)?;
                let sup = sol
                    .grid_t()
                    .windows(2)
                    .flat_map(|w| [w[0], 0.5 * (w[0] + w[1])])
                    .map(|t| (sol.eval(t) - t.powf(alpha)).abs())
                    .fold(0.0, f64::max);
                worst[1] = worst[1].max(sup);
                let e = radial_energy(|t| (sol.eval(t), sol.deriv(t)), &rho, dim(n), big_r)
                    .map_err(|e| e.to_string())?
                    .value;
                let want_e = om * (alpha * alpha + n as f64 - 1.0).powf(n as f64 / 2.0) * big_r.ln();
                worst[2] = worst[2].max(rel(e, want_e));
            }
        }
    }
    let detail = format!("|c err| {:.1e}, sup|H-t^a| {:.1e}, energy rel {:.1e}", worst[0], worst[1], worst[2]);
    ensure(worst.iter().all(|&w| w <= 1e-8), || detail.clone())?;
    Ok(detail)
}

fn kappa_and_c_min() -> Outcome {
    let k = kappa(dim(4)).map_err(|e| e.to_string())?;
    let (c_min, _) = c_bounds(&RadialMetric::unit(), dim(4)).map_err(|e| e.to_string())?;
    let c_min = c_min.finite().ok_or("c_min unbounded for n = 4")?;
    let dk = (k - 1.5f64.sqrt()).abs();
    let dc = (c_min + 2.25).abs();
    let detail = format!("|kappa_4 - sqrt(3/2)| {dk:.1e}, |c_min + 9/4| {dc:.1e}, 2 kappa^2 = {}", 2.0 * k * k);
    ensure(dk <= 1e-12 && dc <= 1e-12, || detail.clone())?;
    Ok(detail)
}

fn test_metrics(n: u32) -> Vec<RadialMetric> {
    vec![
        RadialMetric::unit(),
        RadialMetric::power(1.0).unwrap(),
        RadialMetric::power(-(n as f64)).unwrap(),
        RadialMetric::power(-1.0).unwrap(),
    ]
}

fn triple_closure() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = rng.gen_range(3..=5);
        let metrics = test_metrics(n);
        let rho = &metrics[rng.gen_range(0..metrics.len())];
        let (c_min, c_max) = c_bounds(rho, dim(n)).map_err(|e| e.to_string())?;
        let lo = c_min.finite().unwrap_or(-20.0).max(-20.0);
        let c = rng.gen_range(lo..0.99 * c_max);
        let r_star = rng.gen_range(1.2..5.0);
        let big_r = outer_radius(c, r_star, rho, dim(n)).map_err(|e| e.to_string())?;
        let back = solve_c(big_r, r_star, rho, dim(n)).map_err(|e| e.to_string())?.c;
        worst = worst.max((back - c).abs());
    }
    let detail = format!("max |c' - c| over 20 draws {worst:.1e}");
    ensure(worst <= 1e-9, || detail.clone())?;
    Ok(detail)
}

fn first_integral_constancy() -> Outcome {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for n in [3u32, 4, 5] {
        for rho in test_metrics(n) {
            let c_max = rho.eval(1.0);
            let mut cs = vec![-20.0, -5.0, -1.0, 0.0, 0.5 * c_max, 0.9 * c_max];
            // at c_max the profile exists only when rho(s) s^n grows at s = 1
            if rho.eval(1.01) * 1.01f64.powi(n as i32) > rho.eval(1.0) {
                cs.push(c_max);
            }
            for c in cs {
                let sol = solve(c, 3.0, &rho, n)?;
                worst = worst.max(first_integral_dev(&sol));
                cases += 1;
            }
        }
    }
    let detail = format!("max |L - c|/(1+|c|) {worst:.1e} over {cases} solutions");
    ensure(worst <= 1e-7, || detail.clone())?;
    Ok(detail)
}

fn variational_sup(sol: &RadialSolution, m: usize) -> Result<f64, String> {
    let big_r = sol.outer_radius();
    let r_star = sol.image_outer_radius();
    let min = minimize_profile(big_r, r_star, sol.metric(), sol.n(), m, 1e-11).map_err(|e| e.to_string())?;
    Ok(min
        .profile
        .t()
        .iter()
        .zip(min.profile.h())
        .map(|(&t, &h)| (h - sol.eval(t)).abs())
        .fold(0.0, f64::max))
}

fn variational_equivalence() -> Outcome {
    let cases: [(u32, f64, f64); 6] = [(3, -5.0, 3.0), (4, -2.0, 3.0), (3, 0.0, 3.0), (4, 0.0, 4.0), (3, 0.5, 3.0), (4, 0.9, 3.0)];
    let mut lines = Vec::new();
    let mut ok = true;
    for (n, c, r_star) in cases {
        let sol = solve_profile(c, r_star, &RadialMetric::unit(), dim(n), 8192).map_err(|e| e.to_string())?;
        let fine = variational_sup(&sol, 2048)?;
        let coarse = variational_sup(&sol, 1024)?;
        let ratio = coarse / fine;
        let pass = fine <= 5e-4 && (4.0 / 1.5..=4.0 * 1.5).contains(&ratio);
        ok &= pass;
        lines.push(format!("(n={n},c={c}) sup {fine:.1e} ratio {ratio:.2}"));
    }
    let detail = lines.join("; ");
    ensure(ok, || detail.clone())?;
    Ok(detail)
}

fn lower_bound_sharpness() -> Outcome {
    let mut worst = 0.0f64;
    let mut min_gap = f64::INFINITY;
    for n in [3u32, 4] {
        for rho in [RadialMetric::unit(), RadialMetric::power(-(n as f64)).unwrap()] {
            for c in [-5.0, -1.0, -0.1, 0.0, 0.1, 0.5, 0.9 * rho.eval(1.0)] {
                let r_star = 2.0;
                let sol = solve(c, r_star, &rho, n)?;
                let big_r = sol.outer_radius();
                let lb = lower_bound(c, big_r, r_star, &rho, dim(n)).map_err(|e| e.to_string())?.lower_bound;
                let e = minimizer_energy(&sol).map_err(|e| e.to_string())?.value;
                worst = worst.max(rel(lb, e));
                let lr = big_r.ln();
                for k in 1..=10 {
                    let amp = 0.02 * (r_star - 1.0) / k as f64;
                    let freq = k as f64 * std::f64::consts::PI / lr;
                    let profile = |t: f64| {
                        let x = freq * t.ln();
                        (sol.eval(t) + amp * x.sin(), sol.deriv(t) + amp * freq * x.cos() / t)
                    };
                    let ep = radial_energy(profile, &rho, dim(n), big_r).map_err(|e| e.to_string())?.value;
                    min_gap = min_gap.min((ep - lb) / lb);
                }
            }
        }
    }
    let detail = format!("max |bound - E|/E {worst:.1e}, min relative excess of perturbations {min_gap:.1e}");
    ensure(worst <= 1e-6 && min_gap > 0.0, || detail.clone())?;
    Ok(detail)
}

fn solved_cases() -> Result<Vec<RadialSolution>, String> {
    let mut out = Vec::new();
    for (n, rho, c, r_star) in [
        (3u32, RadialMetric::unit(), -2.0, 2.0),
        (4, RadialMetric::unit(), 0.5, 3.0),
        (4, RadialMetric::power(1.0).unwrap(), -1.0, 2.5),
        (5, RadialMetric::power(-5.0).unwrap(), 0.3, 2.0),
    ] {
        out.push(solve(c, r_star, &rho, n)?);
    }
    Ok(out)
}

fn free_lagrangians() -> Outcome {
    let mut worst = 0.0f64;
    for sol in solved_cases()? {
        let f = free_lagrangians_radial(&sol, None).map_err(|e| e.to_string())?;
        worst = worst
            .max(rel(f.weighted, f.weighted_expected))
            .max(rel(f.normal, f.normal_expected))
            .max(rel(f.tangential, f.tangential_expected));
    }
    let detail = format!("max relative error {worst:.1e}");
    ensure(worst <= 1e-8, || detail.clone())?;
    Ok(detail)
}

fn distortion_identity() -> Outcome {
    let mut worst = 0.0f64;
    for sol in solved_cases()? {
        let e = solution_energy(&sol).map_err(|e| e.to_string())?.value;
        let d = distortion_energy(&sol).map_err(|e| e.to_string())?.value;
        worst = worst.max(rel(d, e));
    }
    let detail = format!("max relative error {worst:.1e}");
    ensure(worst <= 1e-6, || detail.clone())?;
    Ok(detail)
}

fn inversion_invariance() -> Outcome {
    let mut worst = 0.0f64;
    for sol in solved_cases()? {
        let (e, inv) = inversion_energy_check(&sol).map_err(|e| e.to_string())?;
        worst = worst.max(rel(inv, e));
    }
    let detail = format!("max relative error {worst:.1e}");
    ensure(worst <= 1e-8, || detail.clone())?;
    Ok(detail)
}

fn homothety_normalization() -> Outcome {
    let mut norm = 0.0f64;
    for n in [3u32, 4, 5] {
        let om = sphere_area(n - 1).unwrap();
        for lambda in [0.5, 1.0, 2.0, 5.0] {
            let v = jacobian_integral(lambda, dim(n)).map_err(|e| e.to_string())?.value;
            norm = norm.max((v - om).abs());
        }
    }
    let mut slope = 0.0f64;
    let mut second = 0.0f64;
    let mut flat = 0.0f64;
    let h = 1e-3;
    for (n, sigma) in [(4u32, 2.0), (5, 2.0), (4, 3f64.sqrt())] {
        let base = phi_energy(1.0, sigma, dim(n)).map_err(|e| e.to_string())?;
        let up = phi_energy_excess(1.0 + h, sigma, dim(n)).map_err(|e| e.to_string())?;
        let down = phi_energy_excess(1.0 - h, sigma, dim(n)).map_err(|e| e.to_string())?;
        slope = slope.max(((up - down) / (2.0 * h)).abs() / base);
        let num = phi_second_difference(sigma, dim(n), 1e-2).map_err(|e| e.to_string())?;
        let exact = phi_second_derivative(sigma, dim(n));
        if exact == 0.0 || (n, sigma) == (4, 3f64.sqrt()) {
            flat = flat.max(num.abs());
        } else {
            second = second.max(rel(num, exact));
        }
    }
    let detail = format!(
        "|int - omega| {norm:.1e}, |phi'(1)|/phi(1) {slope:.1e}, phi'' rel {second:.1e}, flat case |phi''| {flat:.1e}"
    );
    ensure(norm <= 1e-9 && slope <= 1e-6 && second <= 1e-4 && flat <= 1e-6, || detail.clone())?;
    Ok(detail)
}

fn nonminimality() -> Outcome {
    let rho = RadialMetric::unit();
    let threshold = match nonminimality_threshold(&rho, dim(4), 2.0) {
        Bound::Finite(x) => x,
        Bound::Unbounded => return Err("threshold unbounded for n = 4".into()),
    };
    let sol = solve(-100.0, 2.0, &rho, 4)?;
    let sweep = nonminimality_certificate(&sol, 1.5, DEFAULT_STEPS).map_err(|e| e.to_string())?;
    let deficit = sweep.witness_deficit().unwrap_or(f64::NAN);
    let err = sweep.witness_err().unwrap_or(f64::NAN);
    let detail = format!(
        "threshold {threshold}, witness {:?}, deficit {deficit:.3e} vs 10x err {:.1e}, min eta {:.4} (> {:.4})",
        sweep.witness_lambda,
        10.0 * err,
        sweep.eta_bound.min_eta,
        sweep.eta_bound.threshold.unwrap_or(f64::NAN)
    );
    let pass = (threshold + 64.0).abs() <= 1e-9
        && sweep.verdict == Verdict::NonMinimal
        && deficit > 10.0 * err
        && sweep.eta_bound.holds
        && sweep.eta_bound.min_eta > 3f64.sqrt();
    ensure(pass, || detail.clone())?;
    Ok(detail)
}

fn minimality_on_family() -> Outcome {
    let rho = RadialMetric::unit();
    let mut dip = 0.0f64;
    for (n, cs) in [(3u32, vec![-20.0, -5.0, -1.0, 0.0, 0.5, 0.9]), (4, vec![-2.2, -1.0, 0.0, 0.5, 0.9])] {
        for c in cs {
            let sol = solve(c, 2.0, &rho, n)?;
            let sweep = nonminimality_certificate(&sol, 1.5, DEFAULT_STEPS).map_err(|e| e.to_string())?;
            if sweep.verdict != Verdict::MinimalOnFamily {
                return Err(format!("n={n} c={c}: sweep reports non-minimal"));
            }
            for (e, err) in sweep.energy.iter().zip(&sweep.excess_err) {
                dip = dip.max((sweep.baseline - e) / (10.0 * err).max(f64::MIN_POSITIVE));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let mut violations = 0;
    let samples = 10_000;
    for _ in 0..samples {
        let n: u32 = rng.gen_range(3..=6);
        let nf = n as f64;
        let (u, v): (f64, f64) = (rng.gen_range(0.0..5.0), rng.gen_range(0.0..5.0));
        let lhs = (u * u + (nf - 1.0) * v * v).powf(nf / 2.0);
        let slack = 1e-12 * lhs.max(1.0);
        let sigma = rng.gen_range(0.0..=1.0);
        let (a, b) = lemma36_coeffs(sigma, dim(n)).map_err(|e| e.to_string())?;
        if lhs < a * v.powi(n as i32) + b * u * v.powi(n as i32 - 1) - slack {
            violations += 1;
        }
        let top = kappa(dim(n)).unwrap_or(10.0);
        let sigma = rng.gen_range(1.0..top);
        let (a, b) = lemma37_coeffs(sigma, dim(n)).map_err(|e| e.to_string())?;
        if lhs < a * u.powi(n as i32) + b * u * v.powi(n as i32 - 1) - slack {
            violations += 1;
        }
    }
    let detail = format!("11 sweeps minimal, worst dip/(10 err) {dip:.2}, {violations} violations in 2x{samples} samples");
    ensure(violations == 0 && dip < 1.0, || detail.clone())?;
    Ok(detail)
}

fn elasticity_ode() -> Outcome {
    let mut worst = 0.0f64;
    for n in [3u32, 4] {
        for nu in [-(n as f64), 0.0, 1.0] {
            let rho = if nu == 0.0 { RadialMetric::unit() } else { RadialMetric::power(nu).unwrap() };
            for c in [-2.0, 0.5] {
                let sol = solve(c, 2.5, &rho, n)?;
                let r = elasticity_ode_residual(&sol, nu).map_err(|e| e.to_string())?;
                worst = r.iter().fold(worst, |w, x| w.max(x.abs()));
            }
        }
    }
    let detail = format!("max residual {worst:.1e}");
    ensure(worst <= 1e-6, || detail.clone())?;
    Ok(detail)
}

fn regularity_gate() -> Outcome {
    let mut checked = 0;
    for n in 3u32..=6 {
        let nf = n as f64;
        for nu in [-nf - 2.0, -nf - 0.5, -nf - 1e-3, -nf, -nf + 1e-3, -1.0, 0.0, 2.0] {
            let rho = RadialMetric::power(nu).unwrap();
            let regular = check_regular(&rho, dim(n), 3.0).is_regular();
            if regular != (nu >= -nf) {
                return Err(format!("n={n} nu={nu}: check_regular says {regular}"));
            }
            let solved = solve_profile(-1.0, 2.0, &rho, dim(n), 64);
            match (regular, solved) {
                (true, Ok(_)) | (false, Err(Error::NonRegularMetric { .. })) => {}
                (_, other) => return Err(format!("n={n} nu={nu}: solve gave {:?}", other.map(|s| s.c()))),
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} (n, nu) pairs gated correctly"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 14] = [
        ("power-family exactness", power_family),
        ("kappa_4 and c_min", kappa_and_c_min),
        ("triple closure", triple_closure),
        ("first-integral constancy", first_integral_constancy),
        ("variational equivalence", variational_equivalence),
        ("lower-bound sharpness", lower_bound_sharpness),
        ("free-Lagrangian equalities", free_lagrangians),
        ("distortion identity", distortion_identity),
        ("inversion invariance", inversion_invariance),
        ("homothety normalization", homothety_normalization),
        ("non-minimality certificate", nonminimality),
        ("minimality on family", minimality_on_family),
        ("elasticity ODE", elasticity_ode),
        ("regularity gate", regularity_gate),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(d) => println!("criterion {:2} PASS  {name}: {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {:2} FAIL  {name}: {d}", i + 1);
            }
        }
    }
    println!("acceptance: {}/14 passed", 14 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
