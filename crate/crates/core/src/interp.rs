//! Monotone piecewise-cubic Hermite interpolation.

/// Cubic Hermite interpolant through `(x_k, y_k)` with slopes `d_k`, the
/// slopes limited (Fritsch–Carlson) so monotone data stay monotone.
#[derive(Debug, Clone)]
pub(crate) struct MonotoneHermite {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneHermite {
    /// `x` strictly increasing, `y` non-decreasing, `d >= 0`.
    pub fn new(x: Vec<f64>, y: Vec<f64>, mut d: Vec<f64>) -> Self {
        debug_assert!(x.len() == y.len() && y.len() == d.len() && x.len() >= 2);
        for k in 0..x.len() - 1 {
            let delta = (y[k + 1] - y[k]) / (x[k + 1] - x[k]);
            if delta == 0.0 {
                d[k] = 0.0;
                d[k + 1] = 0.0;
                continue;
            }
            let a = (d[k] / delta).max(0.0);
            let b = (d[k + 1] / delta).max(0.0);
            let s = a * a + b * b;
            if s > 9.0 {
                let tau = 3.0 / s.sqrt();
                d[k] = tau * a * delta;
                d[k + 1] = tau * b * delta;
            }
        }
        MonotoneHermite { x, y, d }
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Value and derivative at `x`, clamped to the data range.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let last = self.x.len() - 1;
        let x = x.clamp(self.x[0], self.x[last]);
        let k = self.x.partition_point(|&xi| xi <= x).clamp(1, last) - 1;
        let h = self.x[k + 1] - self.x[k];
        let t = (x - self.x[k]) / h;
        let (y0, y1) = (self.y[k], self.y[k + 1]);
        let (m0, m1) = (self.d[k] * h, self.d[k + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let value = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * m1;
        let slope = ((6.0 * t2 - 6.0 * t) * y0
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (-6.0 * t2 + 6.0 * t) * y1
            + (3.0 * t2 - 2.0 * t) * m1)
            / h;
        (value, slope)
    }
}
