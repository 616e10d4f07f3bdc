//! Radial metrics on the image annulus, dimensional constants and moduli.
//!
//! Annuli are always normalized to inner radius 1. A problem between
//! `A(r, R)` and `A(r_*, R_*)` is reduced with [`normalize`]: the domain
//! becomes `A(1, R/r)`, the target `A(1, R_*/r_*)`, the metric is replaced by
//! `s -> rho(r_* s)`, and energies scale by `r_*^(-n)`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::special::{gamma_half, pow_half};

/// Ambient dimension `n >= 3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Dimension(u32);

impl Dimension {
    pub fn new(n: u32) -> Result<Self> {
        if n < 3 {
            return Err(domain(format!("dimension must be at least 3, got {n}")));
        }
        Ok(Dimension(n))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }

    pub(crate) fn as_i32(self) -> i32 {
        self.0 as i32
    }
}

impl TryFrom<u32> for Dimension {
    type Error = Error;
    fn try_from(n: u32) -> Result<Self> {
        Dimension::new(n)
    }
}

impl From<Dimension> for u32 {
    fn from(d: Dimension) -> u32 {
        d.0
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Area of the unit `m`-sphere in `R^(m+1)`.
pub fn sphere_area(m: u32) -> Result<f64> {
    if m < 1 {
        return Err(domain("sphere_area needs m >= 1"));
    }
    Ok(2.0 * pow_half(std::f64::consts::PI, m as i32 + 1) / gamma_half(m + 1))
}

/// `omega_{n-1}`, the area of the unit sphere bounding the annuli.
pub(crate) fn omega(n: Dimension) -> f64 {
    sphere_area(n.get() - 1).expect("n >= 3")
}

/// Annulus `A(1, R)` in `R^n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Annulus {
    pub n: Dimension,
    pub outer: f64,
}

impl Annulus {
    pub fn new(n: Dimension, outer: f64) -> Result<Self> {
        if !(outer > 1.0 && outer.is_finite()) {
            return Err(domain(format!("outer radius must be finite and > 1, got {outer}")));
        }
        Ok(Annulus { n, outer })
    }

    pub fn modulus(&self) -> f64 {
        modulus(self)
    }
}

/// `Mod A(1, R) = omega_{n-1} log R`.
pub fn modulus(a: &Annulus) -> f64 {
    omega(a.n) * a.outer.ln()
}

/// Reduce `A(r, R) -> A(r_*, R_*)` with metric `rho` to the normalized
/// problem. Returns `(R/r, R_*/r_*, rho(r_* .))`.
pub fn normalize(
    r: f64,
    big_r: f64,
    r_star: f64,
    big_r_star: f64,
    rho: &RadialMetric,
) -> Result<(f64, f64, RadialMetric)> {
    if !(r > 0.0 && r_star > 0.0) {
        return Err(domain("inner radii must be positive"));
    }
    Ok((big_r / r, big_r_star / r_star, rho.rescaled(r_star)?))
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// How the weight is represented.
#[derive(Clone)]
pub enum MetricKind {
    /// `rho(s) = value`.
    Constant { value: f64 },
    /// `rho(s) = scale * s^nu`.
    Power { scale: f64, nu: f64 },
    /// User callbacks. Not serializable.
    Custom {
        name: String,
        eval: ScalarFn,
        deriv: ScalarFn,
    },
}

impl fmt::Debug for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricKind::Constant { value } => write!(f, "Constant({value})"),
            MetricKind::Power { scale, nu } => write!(f, "Power({scale} * s^{nu})"),
            MetricKind::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

/// A positive C^1 radial weight `rho` on `[lower, upper]`.
#[derive(Clone, Debug)]
pub struct RadialMetric {
    kind: MetricKind,
    lower: f64,
    upper: Option<f64>,
}

const FD_CHECK_POINTS: usize = 257;

impl RadialMetric {
    /// `rho == 1`.
    pub fn unit() -> Self {
        RadialMetric {
            kind: MetricKind::Constant { value: 1.0 },
            lower: 1.0,
            upper: None,
        }
    }

    pub fn constant(value: f64) -> Result<Self> {
        if !(value > 0.0 && value.is_finite()) {
            return Err(domain(format!("constant metric must be positive, got {value}")));
        }
        Ok(RadialMetric {
            kind: MetricKind::Constant { value },
            ..Self::unit()
        })
    }

    /// `rho(s) = s^nu`.
    pub fn power(nu: f64) -> Result<Self> {
        Self::scaled_power(1.0, nu)
    }

    /// `rho(s) = scale * s^nu`.
    pub fn scaled_power(scale: f64, nu: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite() && nu.is_finite()) {
            return Err(domain(format!("invalid power metric {scale} * s^{nu}")));
        }
        Ok(RadialMetric {
            kind: MetricKind::Power { scale, nu },
            ..Self::unit()
        })
    }

    /// Metric from callbacks on `[1, upper]`. Positivity and the derivative
    /// are checked on a grid: `|deriv - centered difference| <= 1e-6 (1 + |deriv|)`.
    pub fn custom<E, D>(name: impl Into<String>, eval: E, deriv: D, upper: f64) -> Result<Self>
    where
        E: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(upper > 1.0 && upper.is_finite()) {
            return Err(domain("custom metric needs a finite upper radius > 1"));
        }
        let m = RadialMetric {
            kind: MetricKind::Custom {
                name: name.into(),
                eval: Arc::new(eval),
                deriv: Arc::new(deriv),
            },
            lower: 1.0,
            upper: Some(upper),
        };
        m.validate_callbacks()?;
        Ok(m)
    }

    fn validate_callbacks(&self) -> Result<()> {
        let hi = self.upper.expect("custom metrics carry an upper radius");
        let lo = self.lower;
        for i in 0..FD_CHECK_POINTS {
            let s = lo + (hi - lo) * i as f64 / (FD_CHECK_POINTS - 1) as f64;
            let v = self.eval(s);
            if !(v > 0.0 && v.is_finite()) {
                return Err(domain(format!("metric is not positive at s = {s}: {v}")));
            }
            let d = self.deriv(s);
            let h = 1e-5 * s.abs().max(1.0);
            let fd = (self.eval(s + h) - self.eval(s - h)) / (2.0 * h);
            if !d.is_finite() || (d - fd).abs() > 1e-6 * (1.0 + d.abs()) {
                return Err(domain(format!(
                    "metric derivative inconsistent at s = {s}: deriv {d}, finite difference {fd}"
                )));
            }
        }
        Ok(())
    }

    /// Restrict the declared domain to `[lower, upper]`.
    pub fn with_domain(mut self, lower: f64, upper: Option<f64>) -> Result<Self> {
        if !(lower > 0.0) || upper.is_some_and(|u| !(u > lower)) {
            return Err(domain("metric domain must satisfy 0 < lower < upper"));
        }
        self.lower = lower;
        self.upper = upper;
        Ok(self)
    }

    pub fn kind(&self) -> &MetricKind {
        &self.kind
    }

    /// `(lower, upper)`; `upper = None` means unbounded above.
    pub fn domain(&self) -> (f64, Option<f64>) {
        (self.lower, self.upper)
    }

    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        match &self.kind {
            MetricKind::Constant { value } => *value,
            MetricKind::Power { scale, nu } => scale * s.powf(*nu),
            MetricKind::Custom { eval, .. } => eval(s),
        }
    }

    #[inline]
    pub fn deriv(&self, s: f64) -> f64 {
        match &self.kind {
            MetricKind::Constant { .. } => 0.0,
            MetricKind::Power { scale, nu } => {
                if *nu == 0.0 {
                    0.0
                } else {
                    scale * nu * s.powf(nu - 1.0)
                }
            }
            MetricKind::Custom { deriv, .. } => deriv(s),
        }
    }

    /// `rho''(s)`; finite differences of `rho'` for custom metrics.
    pub fn second_deriv(&self, s: f64) -> f64 {
        match &self.kind {
            MetricKind::Constant { .. } => 0.0,
            MetricKind::Power { scale, nu } => {
                if *nu == 0.0 || *nu == 1.0 {
                    0.0
                } else {
                    scale * nu * (nu - 1.0) * s.powf(nu - 2.0)
                }
            }
            MetricKind::Custom { deriv, .. } => {
                let h = 1e-5 * s.abs().max(1e-3);
                (deriv(s + h) - deriv(s - h)) / (2.0 * h)
            }
        }
    }

    /// `ln(rho(y) / rho(1))`, given `ln y` to avoid cancellation near `y = 1`.
    pub(crate) fn ln_ratio_to_one(&self, y: f64, ln_y: f64) -> f64 {
        match &self.kind {
            MetricKind::Constant { .. } => 0.0,
            MetricKind::Power { nu, .. } => nu * ln_y,
            MetricKind::Custom { eval, .. } => (eval(y) / eval(1.0)).ln(),
        }
    }

    /// `s -> rho(k s)`.
    pub fn rescaled(&self, k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(domain("rescaling factor must be positive"));
        }
        let kind = match &self.kind {
            MetricKind::Constant { value } => MetricKind::Constant { value: *value },
            MetricKind::Power { scale, nu } => MetricKind::Power {
                scale: scale * k.powf(*nu),
                nu: *nu,
            },
            MetricKind::Custom { name, eval, deriv } => {
                let (e, d) = (eval.clone(), deriv.clone());
                MetricKind::Custom {
                    name: format!("{name}(x{k})"),
                    eval: Arc::new(move |s| e(k * s)),
                    deriv: Arc::new(move |s| k * d(k * s)),
                }
            }
        };
        Ok(RadialMetric {
            kind,
            lower: self.lower / k,
            upper: self.upper.map(|u| u / k),
        })
    }

    /// Serializable description; fails for custom metrics.
    pub fn descriptor(&self) -> Result<MetricDescriptor> {
        let r_star = self.upper;
        let r_inner = (self.lower != 1.0).then_some(self.lower);
        match self.kind {
            MetricKind::Constant { value } => Ok(MetricDescriptor::Constant {
                value,
                r_star,
                r_inner,
            }),
            MetricKind::Power { scale, nu } => Ok(MetricDescriptor::Power {
                nu,
                scale,
                r_star,
                r_inner,
            }),
            MetricKind::Custom { .. } => Err(Error::NotSerializable),
        }
    }

    /// Compact label used by the CLI and reports.
    pub fn label(&self) -> String {
        match &self.kind {
            MetricKind::Constant { value } if *value == 1.0 => "constant".into(),
            MetricKind::Constant { value } => format!("constant:{value}"),
            MetricKind::Power { scale, nu } if *scale == 1.0 => format!("power:{nu}"),
            MetricKind::Power { scale, nu } => format!("{scale}*power:{nu}"),
            MetricKind::Custom { name, .. } => format!("custom:{name}"),
        }
    }
}

fn one() -> f64 {
    1.0
}

fn is_one(x: &f64) -> bool {
    *x == 1.0
}

/// JSON form of a non-custom metric, e.g. `{"kind":"power","nu":-3.0,"r_star":2.0}`
/// or `{"kind":"constant"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MetricDescriptor {
    Constant {
        #[serde(default = "one", skip_serializing_if = "is_one")]
        value: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r_star: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r_inner: Option<f64>,
    },
    Power {
        nu: f64,
        #[serde(default = "one", skip_serializing_if = "is_one")]
        scale: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r_star: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r_inner: Option<f64>,
    },
}

impl TryFrom<&MetricDescriptor> for RadialMetric {
    type Error = Error;
    fn try_from(d: &MetricDescriptor) -> Result<Self> {
        let (m, lower, upper) = match *d {
            MetricDescriptor::Constant {
                value,
                r_star,
                r_inner,
            } => (RadialMetric::constant(value)?, r_inner, r_star),
            MetricDescriptor::Power {
                nu,
                scale,
                r_star,
                r_inner,
            } => (RadialMetric::scaled_power(scale, nu)?, r_inner, r_star),
        };
        m.with_domain(lower.unwrap_or(1.0), upper)
    }
}

impl Serialize for RadialMetric {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        self.descriptor()
            .map_err(serde::ser::Error::custom)?
            .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for RadialMetric {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let d = MetricDescriptor::deserialize(de)?;
        RadialMetric::try_from(&d).map_err(serde::de::Error::custom)
    }
}

/// Command-line syntax: `constant`, `constant:<value>`, `power:<nu>`.
impl FromStr for RadialMetric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let parse = |a: &str| {
            a.trim()
                .parse::<f64>()
                .map_err(|_| domain(format!("bad number in metric spec '{s}'")))
        };
        match (head, arg) {
            ("constant", None) => Ok(RadialMetric::unit()),
            ("constant", Some(a)) => RadialMetric::constant(parse(a)?),
            ("power", Some(a)) => RadialMetric::power(parse(a)?),
            _ => Err(domain(format!(
                "unknown metric '{s}' (expected constant, constant:<v> or power:<nu>)"
            ))),
        }
    }
}

/// Outcome of the regularity test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Regularity {
    Regular,
    /// `rho(s) s^n < rho(1)` at `at` (or `d/ds` of it is negative at `at = 1`).
    Violation { at: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub verdict: Regularity,
    /// Whether `rho(s) s^n` is also non-decreasing on the whole interval.
    pub nondecreasing: bool,
}

impl RegularityReport {
    pub fn is_regular(&self) -> bool {
        self.verdict == Regularity::Regular
    }

    pub(crate) fn into_result(self) -> Result<()> {
        match self.verdict {
            Regularity::Regular => Ok(()),
            Regularity::Violation { at } => Err(Error::NonRegularMetric { at }),
        }
    }
}

const REGULARITY_GRID: usize = 4096;
const REGULARITY_RTOL: f64 = 1e-12;

/// Check that `min_{[1, R_*]} rho(s) s^n` is attained at `s = 1`.
pub fn check_regular(rho: &RadialMetric, n: Dimension, r_star: f64) -> RegularityReport {
    let k = n.as_i32();
    let nf = n.as_f64();
    let g = |s: f64| rho.eval(s) * s.powi(k);
    let slope = |s: f64| {
        let a = s * rho.deriv(s);
        let b = nf * rho.eval(s);
        (a + b, REGULARITY_RTOL * (a.abs() + b.abs()))
    };

    let g1 = g(1.0);
    let floor = g1 * (1.0 - REGULARITY_RTOL);
    let mut first_violation = None;
    let mut nondecreasing = true;
    let mut prev = g1;
    for i in 0..REGULARITY_GRID {
        let s = 1.0 + (r_star - 1.0) * i as f64 / (REGULARITY_GRID - 1) as f64;
        let v = g(s);
        if first_violation.is_none() && !(v >= floor) {
            first_violation = Some(s);
        }
        let (d, tol) = slope(s);
        if d < -tol || v < prev * (1.0 - REGULARITY_RTOL) {
            nondecreasing = false;
        }
        prev = v;
    }
    let verdict = match first_violation {
        Some(at) => Regularity::Violation { at },
        None if slope(1.0).0 < -slope(1.0).1 => Regularity::Violation { at: 1.0 },
        None => Regularity::Regular,
    };
    RegularityReport {
        verdict,
        nondecreasing,
    }
}

/// Metric making the inversion `y -> y/|y|^2` energy-preserving:
/// `rho~(w) = w^(-2n) rho(1/w)` on `[1/R_*, 1/lower]`.
pub fn inverted_metric(rho: &RadialMetric, n: Dimension) -> RadialMetric {
    let two_n = 2.0 * n.as_f64();
    let kind = match &rho.kind {
        MetricKind::Constant { value } => MetricKind::Power {
            scale: *value,
            nu: -two_n,
        },
        MetricKind::Power { scale, nu } => MetricKind::Power {
            scale: *scale,
            nu: -two_n - nu,
        },
        MetricKind::Custom { name, eval, deriv } => {
            let k = n.as_i32();
            let (e, d) = (eval.clone(), deriv.clone());
            let e2 = eval.clone();
            MetricKind::Custom {
                name: format!("inverted({name})"),
                eval: Arc::new(move |w: f64| w.powi(-2 * k) * e(1.0 / w)),
                deriv: Arc::new(move |w: f64| {
                    let inv = 1.0 / w;
                    -(2 * k) as f64 * w.powi(-2 * k - 1) * e2(inv) - w.powi(-2 * k - 2) * d(inv)
                }),
            }
        }
    };
    RadialMetric {
        kind,
        lower: rho.upper.map_or(0.0, |u| 1.0 / u),
        upper: Some(1.0 / rho.lower),
    }
}
