//! Command-line front end. [`run`] never panics on bad input and returns the
//! process exit code: 0 ok, 1 verification (or numerical) failure,
//! 2 Nitsche violation, 64 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::characteristic::{c_bounds, kappa, nonminimality_threshold, Bound};
use crate::energy::{distortion_energy, energy_report, free_lagrangians_radial, inversion_energy_check};
use crate::error::Error;
use crate::io::{read_profile_csv, solution_csv, sweep_csv, to_json, write_atomic};
use crate::metric::{Dimension, RadialMetric};
use crate::radial::{
    image_radius, nitsche_bound, outer_radius, solve_c, solve_profile, RadialSolution, DEFAULT_GRID,
};
use crate::spherical::{nonminimality_certificate, HomothetySweep, Verdict, DEFAULT_STEPS};
use crate::variational::{el_residual, first_integral, first_integral_samples, minimize_profile, DiscreteProfile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_NITSCHE: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser, Debug)]
#[command(name = "nharmonic", version, about = "Radial (rho, n)-harmonic maps between annuli")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve for the missing one of R, R_star, c and write the profile.
    Solve(Common),
    /// Run identity checks on a solution (or on a profile file).
    Verify {
        #[command(flatten)]
        common: Common,
        /// CSV with columns t, H (and optionally dH_dt) to check instead.
        #[arg(long)]
        profile: Option<PathBuf>,
    },
    /// Sweep the homothety family and compare with direct minimization.
    Minimality(Common),
    /// Print c_min, c_max, the Nitsche bound and the non-minimality threshold.
    Bounds(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Dimension, at least 3.
    #[arg(long)]
    n: u32,
    /// `constant`, `constant:<v>` or `power:<nu>`.
    #[arg(long, default_value = "constant")]
    metric: String,
    /// Outer radius of the domain annulus A(1, R).
    #[arg(long = "R")]
    big_r: Option<f64>,
    /// Outer radius of the target annulus A(1, R_star).
    #[arg(long = "R-star")]
    r_star: Option<f64>,
    /// Characteristic constant.
    #[arg(long, allow_negative_numbers = true)]
    c: Option<f64>,
    /// Number of profile grid cells.
    #[arg(long, default_value_t = DEFAULT_GRID)]
    grid: usize,
    /// Optimizer gradient tolerance (relative to 1 + |E|).
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Upper end of the homothety sweep.
    #[arg(long = "lambda-max", default_value_t = 1.5)]
    lambda_max: f64,
    /// Output file (written atomically); stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommandKind {
    Solve,
    Verify,
    Minimality,
    Bounds,
}

/// Validated parameters of one invocation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: CommandKind,
    pub n: Dimension,
    pub metric: RadialMetric,
    pub big_r: Option<f64>,
    pub r_star: Option<f64>,
    pub c: Option<f64>,
    pub grid_m: usize,
    pub tol: f64,
    pub lambda_max: f64,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub profile: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Run(Error),
    Verify(Vec<String>),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

impl RunConfig {
    fn from_cli(cli: Cli) -> Result<Self, Failure> {
        let (command, common, profile) = match cli.command {
            Command::Solve(c) => (CommandKind::Solve, c, None),
            Command::Verify { common, profile } => (CommandKind::Verify, common, profile),
            Command::Minimality(c) => (CommandKind::Minimality, c, None),
            Command::Bounds(c) => (CommandKind::Bounds, c, None),
        };
        let n = Dimension::new(common.n).map_err(|e| usage(e.to_string()))?;
        let metric: RadialMetric = common.metric.parse().map_err(|e: Error| usage(e.to_string()))?;
        for (name, v) in [("--R", common.big_r), ("--R-star", common.r_star)] {
            if let Some(v) = v {
                if !(v > 1.0 && v.is_finite()) {
                    return Err(usage(format!("{name} must be a finite number > 1, got {v}")));
                }
            }
        }
        if common.c.is_some_and(|c| !c.is_finite()) {
            return Err(usage("--c must be finite"));
        }
        if common.grid < 4 {
            return Err(usage("--grid must be at least 4"));
        }
        if !(common.tol > 0.0) {
            return Err(usage("--tol must be positive"));
        }
        if !(common.lambda_max > 1.0 && common.lambda_max.is_finite()) {
            return Err(usage("--lambda-max must be > 1"));
        }
        if command != CommandKind::Bounds {
            let given = [common.big_r.is_some(), common.r_star.is_some(), common.c.is_some()]
                .iter()
                .filter(|&&b| b)
                .count();
            if given != 2 {
                return Err(usage("exactly two of --R, --R-star, --c are required"));
            }
        }
        Ok(RunConfig {
            command,
            n,
            metric,
            big_r: common.big_r,
            r_star: common.r_star,
            c: common.c,
            grid_m: common.grid,
            tol: common.tol,
            lambda_max: common.lambda_max,
            output: common.out,
            format: common.format,
            profile,
        })
    }
}

/// Parameters and admissibility data of a solved configuration.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub n: Dimension,
    pub metric: RadialMetric,
    pub c: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    #[serde(rename = "R_star")]
    pub r_star: f64,
    pub c_min: Bound,
    pub c_max: f64,
    pub admissible: bool,
    pub in_minimal_range: bool,
    pub nitsche_bound: Option<f64>,
    pub nonminimality_threshold: Bound,
}

fn summary(sol: &RadialSolution) -> Summary {
    let cc = sol.char_constant();
    Summary {
        n: sol.n(),
        metric: sol.metric().clone(),
        c: cc.c,
        big_r: sol.outer_radius(),
        r_star: sol.image_outer_radius(),
        c_min: cc.c_min,
        c_max: cc.c_max,
        admissible: cc.exists(),
        in_minimal_range: cc.in_minimal_range(),
        nitsche_bound: nitsche_bound(sol.outer_radius(), sol.metric(), sol.n()).ok(),
        nonminimality_threshold: nonminimality_threshold(sol.metric(), sol.n(), sol.image_outer_radius()),
    }
}

/// Solve for whichever of `R`, `R_*`, `c` is missing and build the profile.
pub fn solve_config(cfg: &RunConfig) -> crate::Result<RadialSolution> {
    let (rho, n, m) = (&cfg.metric, cfg.n, cfg.grid_m);
    let with_bound = |e: Error, big_r: f64| match e {
        Error::NitscheViolation {
            c,
            c_max,
            min_outer_image_radius: None,
        } => Error::NitscheViolation {
            c,
            c_max,
            min_outer_image_radius: nitsche_bound(big_r, rho, n).ok(),
        },
        e => e,
    };
    match (cfg.big_r, cfg.r_star, cfg.c) {
        (Some(big_r), Some(r_star), None) => {
            let c = solve_c(big_r, r_star, rho, n)?.c;
            solve_profile(c, r_star, rho, n, m)
        }
        (None, Some(r_star), Some(c)) => {
            outer_radius(c, r_star, rho, n)?;
            solve_profile(c, r_star, rho, n, m)
        }
        (Some(big_r), None, Some(c)) => {
            let r_star = image_radius(c, big_r, rho, n).map_err(|e| with_bound(e, big_r))?;
            solve_profile(c, r_star, rho, n, m)
        }
        _ => Err(crate::error::domain("exactly two of R, R_star, c are required")),
    }
}

struct Artifact {
    json: String,
    csv: Vec<u8>,
    /// Printed when the artifact goes to a file (or to stderr otherwise).
    note: Option<String>,
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    summary: Summary,
    solution: &'a RadialSolution,
}

fn cmd_solve(cfg: &RunConfig) -> Result<Artifact, Failure> {
    let sol = solve_config(cfg)?;
    Ok(Artifact {
        json: to_json(&SolveOutput {
            summary: summary(&sol),
            solution: &sol,
        })?,
        csv: solution_csv(&sol)?,
        note: None,
    })
}

/// One named check of `verify`.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub max_residual: f64,
    pub tolerance: f64,
}

fn check(name: &'static str, residual: f64, tolerance: f64) -> Check {
    Check {
        name,
        pass: residual <= tolerance,
        max_residual: residual,
        tolerance,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |a, x| if x.is_nan() { f64::NAN } else { a.max(x.abs()) })
}

/// Grid used for the discrete Euler-Lagrange residual of a solution.
const EL_CELLS: usize = 4096;
/// Its tolerance: the residual is O(m^-2) relative to `max |L_H|`.
const EL_TOL: f64 = 1e-6;
/// First-integral tolerance when the profile file has no derivative column
/// and `H'` comes from three-point differences.
const FI_TOL_DIFFERENCED: f64 = 1e-4;

fn profile_checks(cfg: &RunConfig, sol: &RadialSolution, path: &PathBuf) -> Result<Vec<Check>, Failure> {
    let table = read_profile_csv(path)?;
    let p = &table.profile;
    let (t, h) = (p.t(), p.h());
    let c = sol.c();
    let scale = 1.0 + c.abs();
    let last = t.len() - 1;
    let ends = rel(t[last], sol.outer_radius()).max(rel(h[last], sol.image_outer_radius()));
    let mut checks = vec![check("boundary", ends, 1e-9)];
    let hdot: Vec<f64> = match &table.dh_dt {
        Some(d) => d.clone(),
        None => (0..=last)
            .map(|i| {
                let (a, b, c0) = match i {
                    0 => (0, 1, 2),
                    _ if i == last => (last - 2, last - 1, last),
                    _ => (i - 1, i, i + 1),
                };
                lagrange_slope(t, h, [a, b, c0], t[i])
            })
            .collect(),
    };
    let tol = if table.dh_dt.is_some() { 1e-7 } else { FI_TOL_DIFFERENCED };
    let dev = max_abs((0..=last).map(|i| first_integral(h[i], hdot[i], t[i], &cfg.metric, cfg.n) - c));
    checks.push(check("first_integral", dev / scale, tol));
    if last >= 32 {
        let res = el_residual(p, &cfg.metric, cfg.n)?;
        checks.push(check("el_residual", max_abs(res), 1e-4));
    }
    Ok(checks)
}

/// Derivative at `x` of the quadratic through three nodes.
fn lagrange_slope(t: &[f64], h: &[f64], idx: [usize; 3], x: f64) -> f64 {
    let [a, b, c] = idx;
    let (ta, tb, tc) = (t[a], t[b], t[c]);
    h[a] * ((x - tb) + (x - tc)) / ((ta - tb) * (ta - tc))
        + h[b] * ((x - ta) + (x - tc)) / ((tb - ta) * (tb - tc))
        + h[c] * ((x - ta) + (x - tb)) / ((tc - ta) * (tc - tb))
}

/// Run every identity check on the solution of `cfg`.
pub fn verify_checks(cfg: &RunConfig) -> crate::Result<(RadialSolution, Vec<Check>)> {
    let sol = solve_config(cfg)?;
    let c = sol.c();
    let scale = 1.0 + c.abs();
    let mut checks = Vec::new();

    let dev = max_abs(first_integral_samples(&sol, 512).into_iter().map(|(_, l)| l - c));
    checks.push(check("first_integral", dev / scale, 1e-7));

    let res = el_residual(&DiscreteProfile::from_solution(&sol, EL_CELLS), &cfg.metric, cfg.n)?;
    checks.push(check("el_residual", max_abs(res), EL_TOL));

    let report = energy_report(&sol)?;
    checks.push(check("lower_bound_equality", rel(report.lower_bound, report.total), 1e-6));

    let fl = free_lagrangians_radial(&sol, None)?;
    let fl_dev = rel(fl.weighted, fl.weighted_expected)
        .max(rel(fl.normal, fl.normal_expected))
        .max(rel(fl.tangential, fl.tangential_expected));
    checks.push(check("free_lagrangians", fl_dev, 1e-8));

    let dist = distortion_energy(&sol)?;
    checks.push(check("distortion_identity", rel(dist.value, report.total), 1e-6));

    let (e, e_inv) = inversion_energy_check(&sol)?;
    checks.push(check("inversion_invariance", rel(e_inv, e), 1e-8));
    Ok((sol, checks))
}

#[derive(Serialize)]
struct VerifyOutput<'a> {
    summary: Summary,
    profile: Option<String>,
    checks: &'a [Check],
    pass: bool,
}

fn cmd_verify(cfg: &RunConfig) -> Result<(Artifact, Vec<String>), Failure> {
    let (sol, mut checks) = verify_checks(cfg)?;
    if let Some(path) = &cfg.profile {
        let file = profile_checks(cfg, &sol, path)?;
        for fc in file {
            match checks.iter_mut().find(|c| c.name == fc.name) {
                Some(slot) => *slot = fc,
                None => checks.push(fc),
            }
        }
    }
    let failed: Vec<String> = checks.iter().filter(|c| !c.pass).map(|c| c.name.to_string()).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["check", "pass", "max_residual", "tolerance"]).map_err(Error::from)?;
    for c in &checks {
        w.write_record([
            c.name.to_string(),
            c.pass.to_string(),
            c.max_residual.to_string(),
            c.tolerance.to_string(),
        ])
        .map_err(Error::from)?;
    }
    let csv = w.into_inner().map_err(|e| Error::from(e.into_error()))?;
    let json = to_json(&VerifyOutput {
        summary: summary(&sol),
        profile: cfg.profile.as_ref().map(|p| p.display().to_string()),
        checks: &checks,
        pass: failed.is_empty(),
    })?;
    Ok((Artifact { json, csv, note: None }, failed))
}

/// Direct minimization compared with the analytic profile.
#[derive(Debug, Clone, Serialize)]
pub struct VariationalComparison {
    pub m: usize,
    pub energy: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub sup_diff: f64,
}

#[derive(Serialize)]
struct MinimalityOutput {
    summary: Summary,
    sweep: HomothetySweep,
    variational: VariationalComparison,
    verdict: String,
}

fn verdict_line(s: &HomothetySweep) -> String {
    let range = if s.below_nonminimality_threshold {
        "c is below the non-minimality threshold"
    } else if s.in_minimal_range {
        "c is in the minimal range"
    } else {
        "c is outside the minimal range"
    };
    match (s.verdict, s.witness_lambda) {
        (Verdict::NonMinimal, Some(w)) => format!("non-minimal, witness lambda = {w}; {range}"),
        _ => format!("radial-minimal-on-tested-families; {range}"),
    }
}

fn cmd_minimality(cfg: &RunConfig) -> Result<Artifact, Failure> {
    let sol = solve_config(cfg)?;
    let sweep = nonminimality_certificate(&sol, cfg.lambda_max, DEFAULT_STEPS)?;
    let min = minimize_profile(
        sol.outer_radius(),
        sol.image_outer_radius(),
        &cfg.metric,
        cfg.n,
        cfg.grid_m,
        cfg.tol,
    )?;
    let sup_diff = max_abs(
        min.profile
            .t()
            .iter()
            .zip(min.profile.h())
            .map(|(&t, &h)| h - sol.eval(t)),
    );
    let verdict = verdict_line(&sweep);
    let csv = sweep_csv(&sweep)?;
    let out = MinimalityOutput {
        summary: summary(&sol),
        sweep,
        variational: VariationalComparison {
            m: cfg.grid_m,
            energy: min.energy,
            iterations: min.iterations,
            grad_norm: min.grad_norm,
            sup_diff,
        },
        verdict: verdict.clone(),
    };
    Ok(Artifact {
        json: to_json(&out)?,
        csv,
        note: Some(format!("verdict: {verdict}")),
    })
}

#[derive(Serialize)]
struct BoundsOutput {
    n: Dimension,
    metric: RadialMetric,
    c_min: Bound,
    c_max: f64,
    /// `None` when unbounded (n = 3).
    kappa: Option<f64>,
    #[serde(rename = "R")]
    big_r: Option<f64>,
    nitsche_bound: Option<f64>,
    #[serde(rename = "R_star")]
    r_star: Option<f64>,
    nonminimality_threshold: Option<Bound>,
}

fn cmd_bounds(cfg: &RunConfig) -> Result<Artifact, Failure> {
    let (rho, n) = (&cfg.metric, cfg.n);
    let (c_min, c_max) = c_bounds(rho, n)?;
    let out = BoundsOutput {
        n,
        metric: rho.clone(),
        c_min,
        c_max,
        kappa: kappa(n).ok(),
        big_r: cfg.big_r,
        nitsche_bound: cfg.big_r.map(|r| nitsche_bound(r, rho, n)).transpose()?,
        r_star: cfg.r_star,
        nonminimality_threshold: cfg.r_star.map(|r| nonminimality_threshold(rho, n, r)),
    };
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut w = csv::Writer::from_writer(Vec::new());
    let rows = [
        ("c_min", c_min.to_string()),
        ("c_max", c_max.to_string()),
        ("kappa", out.kappa.map_or("inf".into(), |k| k.to_string())),
        ("nitsche_bound", opt(out.nitsche_bound)),
        (
            "nonminimality_threshold",
            out.nonminimality_threshold.map(|b| b.to_string()).unwrap_or_default(),
        ),
    ];
    w.write_record(["quantity", "value"]).map_err(Error::from)?;
    for (k, v) in rows {
        w.write_record([k, v.as_str()]).map_err(Error::from)?;
    }
    let csv = w.into_inner().map_err(|e| Error::from(e.into_error()))?;
    Ok(Artifact {
        json: to_json(&out)?,
        csv,
        note: None,
    })
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NitscheViolation { .. } => EXIT_NITSCHE,
        Error::Domain(_)
        | Error::NonRegularMetric { .. }
        | Error::Range(_)
        | Error::Unbounded(_)
        | Error::Divergent(_) => EXIT_USAGE,
        _ => EXIT_VERIFY,
    }
}

fn emit(cfg: &RunConfig, art: &Artifact, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    let bytes = match cfg.format {
        Format::Json => art.json.as_bytes(),
        Format::Csv => art.csv.as_slice(),
    };
    match &cfg.output {
        Some(path) => {
            write_atomic(path, bytes)?;
            if let Some(note) = &art.note {
                let _ = writeln!(out, "{note}");
            }
            let _ = writeln!(out, "wrote {}", path.display());
        }
        None => {
            out.write_all(bytes).map_err(Error::from)?;
            if let Some(note) = &art.note {
                let _ = writeln!(err, "{note}");
            }
        }
    }
    Ok(())
}

fn execute(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    match cfg.command {
        CommandKind::Solve => emit(cfg, &cmd_solve(cfg)?, out, err),
        CommandKind::Minimality => emit(cfg, &cmd_minimality(cfg)?, out, err),
        CommandKind::Bounds => emit(cfg, &cmd_bounds(cfg)?, out, err),
        CommandKind::Verify => {
            let (art, failed) = cmd_verify(cfg)?;
            emit(cfg, &art, out, err)?;
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Failure::Verify(failed))
            }
        }
    }
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    let result = RunConfig::from_cli(cli).and_then(|cfg| execute(&cfg, out, err));
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Verify(names)) => {
            let _ = writeln!(err, "verification failed: {}", names.join(", "));
            EXIT_VERIFY
        }
        Err(Failure::Run(e)) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}
