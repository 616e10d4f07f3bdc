//! Independent oracle: integrate d log H / d log t = sqrt(Psi(v_c(H))) by
//! classical RK4, with Psi inverted by plain bisection, and compare against
//! the quadrature-based solver.

use nharmonic::metric::{Dimension, RadialMetric};
use nharmonic::radial::solve_profile;

fn phi(z: f64, n: f64) -> f64 {
    (1.0 - z) * (1.0 + z / (n - 1.0)).powf((n - 2.0) / 2.0)
}

fn psi(w: f64, n: f64) -> f64 {
    let mut hi = 1.0;
    while phi(hi, n) > w {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi(mid, n) > w {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn oracle(c: f64, rho: impl Fn(f64) -> f64, n: u32, t_end: f64, steps: usize) -> f64 {
    let nf = n as f64;
    let rhs = |y: f64| {
        let s = y.exp();
        let v = c / (s.powi(n as i32) * rho(s));
        psi(v.min(1.0), nf).sqrt()
    };
    let dx = t_end.ln() / steps as f64;
    let mut y = 0.0;
    for _ in 0..steps {
        let k1 = rhs(y);
        let k2 = rhs(y + 0.5 * dx * k1);
        let k3 = rhs(y + 0.5 * dx * k2);
        let k4 = rhs(y + dx * k3);
        y += dx * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
    }
    y.exp()
}

#[test]
fn solver_matches_runge_kutta() {
    let cases: [(u32, f64, f64); 6] = [(3, -5.0, 0.0), (3, 0.5, 0.0), (4, -2.0, 0.0), (4, 0.0, 0.0), (5, 0.8, 1.0), (4, -1.0, 1.0)];
    for (n, c, nu) in cases {
        let rho = if nu == 0.0 { RadialMetric::unit() } else { RadialMetric::power(nu).unwrap() };
        let sol = solve_profile(c, 2.0, &rho, Dimension::new(n).unwrap(), 1024).unwrap();
        let big_r = sol.outer_radius();
        for k in 1..=8 {
            let t = big_r.powf(k as f64 / 8.0);
            let want = oracle(c, |s| s.powf(nu), n, t, 4000);
            let got = sol.eval(t);
            assert!(
                (got - want).abs() <= 1e-7 * want,
                "n={n} c={c} nu={nu} t={t}: {got} vs {want}"
            );
        }
    }
}
