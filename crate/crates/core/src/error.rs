use thiserror::Error;

/// Everything that can go wrong while building or evaluating a deformation.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The characteristic constant exceeds `rho(1)`, or the requested pair of
    /// radii admits no radial harmonic diffeomorphism.
    #[error(
        "Nitsche violation: c = {c} exceeds c_max = {c_max}{}",
        min_outer_image_radius
            .map(|r| format!("; minimal admissible R_* = {r}"))
            .unwrap_or_default()
    )]
    NitscheViolation {
        c: f64,
        c_max: f64,
        min_outer_image_radius: Option<f64>,
    },

    /// `rho(s) s^n` does not attain its minimum at the inner radius.
    #[error("metric is not regular: rho(s)s^n drops below its value at s = 1 near s = {at}")]
    NonRegularMetric { at: f64 },

    /// A quantity that is infinite for the requested parameters (e.g. kappa_3).
    #[error("unbounded: {0}")]
    Unbounded(String),

    /// A parameter outside the range where a formula is valid.
    #[error("range error: {0}")]
    Range(String),

    /// The profile integral diverges (the image annulus collapses onto the
    /// inner sphere).
    #[error("divergent profile: {0}")]
    Divergent(String),

    #[error("quadrature did not converge on [{a}, {b}]: value {value}, error estimate {abs_err}")]
    Quadrature {
        a: f64,
        b: f64,
        value: f64,
        abs_err: f64,
    },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("degenerate Jacobian: {0}")]
    DegenerateJacobian(String),

    #[error("custom metrics cannot be serialized")]
    NotSerializable,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
