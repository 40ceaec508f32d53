//! Monotone rational-quadratic splines and their circular variant.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{bail, Result};

pub const DEFAULT_BINS: usize = 30;

/// Monotone rational-quadratic spline on `[lo, hi]` with endpoints pinned.
#[derive(Debug, Clone, PartialEq)]
pub struct RQSpline {
    knots_x: Vec<f64>,
    knots_y: Vec<f64>,
    derivs: Vec<f64>,
}

impl RQSpline {
    pub fn new(knots_x: Vec<f64>, knots_y: Vec<f64>, derivs: Vec<f64>) -> Result<Self> {
        let n = knots_x.len();
        if n < 2 || knots_y.len() != n || derivs.len() != n {
            bail!(Dimension, "spline needs matching knot and derivative vectors of length >= 2");
        }
        if knots_x.windows(2).any(|w| !(w[1] > w[0])) || knots_y.windows(2).any(|w| !(w[1] > w[0])) {
            bail!(InvalidInput, "spline knots must be strictly increasing");
        }
        if (knots_x[0] - knots_y[0]).abs() > 1e-12 || (knots_x[n - 1] - knots_y[n - 1]).abs() > 1e-12 {
            bail!(InvalidInput, "spline endpoints must map lo -> lo and hi -> hi");
        }
        if derivs.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            bail!(InvalidInput, "spline derivatives must be positive and finite");
        }
        Ok(RQSpline { knots_x, knots_y, derivs })
    }

    pub fn identity(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if !(hi > lo) || bins == 0 {
            bail!(InvalidInput, "identity spline needs lo < hi and at least one bin");
        }
        let knots: Vec<f64> =
            (0..=bins).map(|i| if i == bins { hi } else { lo + (hi - lo) * i as f64 / bins as f64 }).collect();
        Self::new(knots.clone(), knots, alloc::vec![1.0; bins + 1])
    }

    /// Builds a valid spline from unconstrained parameters: bin widths and
    /// heights through a softmax, derivatives through a softplus.
    pub fn from_unnormalized(lo: f64, hi: f64, widths: &[f64], heights: &[f64], derivs: &[f64]) -> Result<Self> {
        let bins = widths.len();
        if heights.len() != bins || derivs.len() != bins + 1 {
            bail!(Dimension, "expected {bins} heights and {} derivatives", bins + 1);
        }
        let knots = |raw: &[f64]| -> Vec<f64> {
            let m = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = raw.iter().map(|r| (r - m).exp()).collect();
            let total: f64 = e.iter().sum();
            let mut acc = lo;
            let mut out = alloc::vec![lo];
            for (i, w) in e.iter().enumerate() {
                acc += (hi - lo) * w / total;
                out.push(if i + 1 == bins { hi } else { acc });
            }
            out
        };
        let d: Vec<f64> = derivs.iter().map(|&x| softplus(x) + 1e-3).collect();
        Self::new(knots(widths), knots(heights), d)
    }

    pub fn bins(&self) -> usize {
        self.knots_x.len() - 1
    }

    pub fn lo(&self) -> f64 {
        self.knots_x[0]
    }

    pub fn hi(&self) -> f64 {
        *self.knots_x.last().unwrap()
    }

    pub fn derivs(&self) -> &[f64] {
        &self.derivs
    }

    fn check_range(&self, x: f64) -> Result<()> {
        if !(x >= self.lo() && x <= self.hi()) {
            bail!(OutOfDomain, "spline input {x} outside [{}, {}]", self.lo(), self.hi());
        }
        Ok(())
    }

    fn bin_of(knots: &[f64], x: f64) -> usize {
        let idx = knots.partition_point(|&k| k <= x);
        idx.clamp(1, knots.len() - 1) - 1
    }

    /// `(y, ln dy/dx)`.
    pub fn forward(&self, x: f64) -> Result<(f64, f64)> {
        self.check_range(x)?;
        let k = Self::bin_of(&self.knots_x, x);
        let (x0, x1) = (self.knots_x[k], self.knots_x[k + 1]);
        let (y0, y1) = (self.knots_y[k], self.knots_y[k + 1]);
        let (d0, d1) = (self.derivs[k], self.derivs[k + 1]);
        let w = x1 - x0;
        let dy = y1 - y0;
        let s = dy / w;
        let xi = ((x - x0) / w).clamp(0.0, 1.0);
        let om = 1.0 - xi;
        let denom = s + (d1 + d0 - 2.0 * s) * xi * om;
        let y = y0 + dy * (s * xi * xi + d0 * xi * om) / denom;
        let num = s * s * (d1 * xi * xi + 2.0 * s * xi * om + d0 * om * om);
        Ok((y, num.ln() - 2.0 * denom.ln()))
    }

    /// `(x, ln dx/dy)`.
    pub fn inverse(&self, y: f64) -> Result<(f64, f64)> {
        self.check_range(y)?;
        let k = Self::bin_of(&self.knots_y, y);
        let (x0, x1) = (self.knots_x[k], self.knots_x[k + 1]);
        let (y0, y1) = (self.knots_y[k], self.knots_y[k + 1]);
        let (d0, d1) = (self.derivs[k], self.derivs[k + 1]);
        let w = x1 - x0;
        let dy = y1 - y0;
        let s = dy / w;
        let rel = y - y0;
        let t = d1 + d0 - 2.0 * s;
        let a = dy * (s - d0) + rel * t;
        let b = dy * d0 - rel * t;
        let c = -s * rel;
        let disc = (b * b - 4.0 * a * c).max(0.0);
        let xi = (2.0 * c / (-b - disc.sqrt())).clamp(0.0, 1.0);
        let x = (x0 + xi * w).clamp(self.lo(), self.hi());
        let (_, ld) = self.forward(x)?;
        Ok((x, -ld))
    }
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// Rational-quadratic spline on `[-pi, pi]` with equal boundary
/// derivatives, followed by a rotation by `offset` (wrapped to
/// `(-pi, pi]`).
#[derive(Debug, Clone, PartialEq)]
pub struct CircularSpline {
    spline: RQSpline,
    offset: f64,
}

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut r = libm::fmod(theta + PI, two_pi);
    if r < 0.0 {
        r += two_pi;
    }
    let mut t = r - PI;
    if t <= -PI {
        t += two_pi;
    }
    t
}

impl CircularSpline {
    pub fn new(spline: RQSpline, offset: f64) -> Result<Self> {
        if (spline.lo() + PI).abs() > 1e-12 || (spline.hi() - PI).abs() > 1e-12 {
            bail!(InvalidInput, "circular spline must be defined on [-pi, pi]");
        }
        let d = spline.derivs();
        if (d[0] - d[d.len() - 1]).abs() > 1e-12 * d[0].max(1.0) {
            bail!(InvalidInput, "circular spline needs equal derivatives at -pi and pi");
        }
        if !offset.is_finite() {
            bail!(InvalidInput, "offset must be finite");
        }
        Ok(CircularSpline { spline, offset })
    }

    pub fn identity(bins: usize) -> Result<Self> {
        Self::new(RQSpline::identity(-PI, PI, bins)?, 0.0)
    }

    /// Unconstrained parameterisation; the last derivative is tied to the
    /// first.
    pub fn from_unnormalized(widths: &[f64], heights: &[f64], derivs: &[f64], offset: f64) -> Result<Self> {
        let mut d = derivs.to_vec();
        d.push(derivs[0]);
        Self::new(RQSpline::from_unnormalized(-PI, PI, widths, heights, &d)?, offset)
    }

    fn check(theta: f64) -> Result<()> {
        if !(theta > -PI - 1e-12 && theta <= PI + 1e-12) {
            bail!(OutOfDomain, "angle {theta} outside (-pi, pi]");
        }
        Ok(())
    }

    pub fn forward(&self, theta: f64) -> Result<(f64, f64)> {
        Self::check(theta)?;
        let (y, ld) = self.spline.forward(theta.clamp(-PI, PI))?;
        Ok((wrap_angle(y + self.offset), ld))
    }

    pub fn inverse(&self, theta: f64) -> Result<(f64, f64)> {
        Self::check(theta)?;
        let y = wrap_angle(theta - self.offset);
        self.spline.inverse(y)
    }
}
