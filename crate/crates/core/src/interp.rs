//! Piecewise cubic Hermite interpolation.

use serde::{Deserialize, Serialize};

/// Value of the cubic Hermite interpolant on `[x0, x1]`.
#[inline]
pub fn hermite(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> f64 {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

/// Derivative of the cubic Hermite interpolant on `[x0, x1]`.
#[inline]
pub fn hermite_deriv(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> f64 {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let dh00 = 6.0 * t2 - 6.0 * t;
    let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
    let dh01 = -6.0 * t2 + 6.0 * t;
    let dh11 = 3.0 * t2 - 2.0 * t;
    (dh00 * y0 + dh01 * y1) / h + dh10 * d0 + dh11 * d1
}

/// Index `i` with `xs[i] <= x <= xs[i + 1]`, clamped to the table.
pub fn locate(xs: &[f64], x: f64) -> usize {
    debug_assert!(xs.len() >= 2);
    let n = xs.len();
    match xs.binary_search_by(|v| v.total_cmp(&x)) {
        Ok(i) => i.min(n - 2),
        Err(0) => 0,
        Err(i) if i >= n => n - 2,
        Err(i) => i - 1,
    }
}

/// Fritsch-Carlson limiter: rescales `slopes` so that the Hermite
/// interpolant of `(xs, ys)` is monotone on every interval where the data
/// are monotone.
pub fn limit_monotone(xs: &[f64], ys: &[f64], slopes: &mut [f64]) {
    let n = xs.len();
    for i in 0..n.saturating_sub(1) {
        let delta = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
        if delta == 0.0 {
            slopes[i] = 0.0;
            slopes[i + 1] = 0.0;
            continue;
        }
        if slopes[i] * delta < 0.0 {
            slopes[i] = 0.0;
        }
        if slopes[i + 1] * delta < 0.0 {
            slopes[i + 1] = 0.0;
        }
        let a = slopes[i] / delta;
        let b = slopes[i + 1] / delta;
        let s = a * a + b * b;
        if s > 9.0 {
            let tau = 3.0 / s.sqrt();
            slopes[i] = tau * a * delta;
            slopes[i + 1] = tau * b * delta;
        }
    }
}

/// Shape-preserving piecewise cubic (PCHIP) through tabulated data, with
/// optional linear pieces on the first and last intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
    linear_ends: bool,
}

impl MonotoneCubic {
    /// Builds the interpolant with Fritsch-Butland (weighted harmonic mean)
    /// interior slopes. `xs` must be strictly increasing with at least two
    /// points.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, linear_ends: bool) -> Self {
        let n = xs.len();
        assert!(n >= 2 && ys.len() == n, "need at least two matching samples");
        let secants: Vec<f64> = (0..n - 1)
            .map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]))
            .collect();
        let mut slopes = vec![0.0; n];
        if n == 2 {
            slopes[0] = secants[0];
            slopes[1] = secants[0];
        } else {
            for i in 1..n - 1 {
                let (d0, d1) = (secants[i - 1], secants[i]);
                if d0 * d1 <= 0.0 {
                    slopes[i] = 0.0;
                } else {
                    let h0 = xs[i] - xs[i - 1];
                    let h1 = xs[i + 1] - xs[i];
                    let w1 = 2.0 * h1 + h0;
                    let w2 = h1 + 2.0 * h0;
                    slopes[i] = (w1 + w2) / (w1 / d0 + w2 / d1);
                }
            }
            slopes[0] = end_slope(xs[1] - xs[0], xs[2] - xs[1], secants[0], secants[1]);
            slopes[n - 1] = end_slope(
                xs[n - 1] - xs[n - 2],
                xs[n - 2] - xs[n - 3],
                secants[n - 2],
                secants[n - 3],
            );
        }
        Self {
            xs,
            ys,
            slopes,
            linear_ends,
        }
    }

    /// Uses caller-supplied slopes, limited for monotonicity.
    pub fn with_slopes(xs: Vec<f64>, ys: Vec<f64>, mut slopes: Vec<f64>) -> Self {
        limit_monotone(&xs, &ys, &mut slopes);
        Self {
            xs,
            ys,
            slopes,
            linear_ends: false,
        }
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = locate(&self.xs, x);
        let n = self.xs.len();
        let (x0, x1, y0, y1) = (self.xs[i], self.xs[i + 1], self.ys[i], self.ys[i + 1]);
        if self.linear_ends && (i == 0 || i == n - 2) {
            return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
        }
        hermite(x0, x1, y0, y1, self.slopes[i], self.slopes[i + 1], x)
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let i = locate(&self.xs, x);
        let n = self.xs.len();
        let (x0, x1, y0, y1) = (self.xs[i], self.xs[i + 1], self.ys[i], self.ys[i + 1]);
        if self.linear_ends && (i == 0 || i == n - 2) {
            return (y1 - y0) / (x1 - x0);
        }
        hermite_deriv(x0, x1, y0, y1, self.slopes[i], self.slopes[i + 1], x)
    }
}

// Three-point end formula, clipped so the end piece stays shape-preserving.
fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}
