//! Hit-and-run homeomorphism between a polytope containing the origin and
//! the unit ball, plus the cylinder/polar coordinates on top of it.
//!
//! For a direction `s` let `alpha(s)` be the distance from the origin to the
//! boundary along `s`. A point `v = d s` maps to `beta = (d / alpha)^e s`, so
//! the inverse is `v = alpha(s) r^q s` with `r = |beta|` and `q = 1/e`.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{bail, Result};
use crate::linalg::{log_abs_det, Matrix, Vector};
use crate::polytope::HPolytope;

/// Rows with `|a_i·s|` below this are parallel to the ray.
pub const PARALLEL_TOL: f64 = 1e-14;
/// Relative margin under which two facets count as tied.
pub const FACET_TIE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallMapConfig {
    /// Radial exponent `e`; `None` means `1/K`.
    pub exponent: Option<f64>,
    /// Admit points on the boundary (`r = 1`).
    pub closed_ball: bool,
}

impl Default for BallMapConfig {
    fn default() -> Self {
        BallMapConfig { exponent: None, closed_ball: false }
    }
}

impl BallMapConfig {
    pub fn with_exponent(exponent: f64) -> Self {
        BallMapConfig { exponent: Some(exponent), closed_ball: false }
    }

    pub fn exponent_for(&self, k: usize) -> Result<f64> {
        let e = self.exponent.unwrap_or(1.0 / k as f64);
        if !(e > 0.0 && e <= 1.0) {
            bail!(InvalidInput, "ball exponent must lie in (0, 1], got {e}");
        }
        Ok(e)
    }
}

/// Boundary distance along `s` and the row that attains it.
#[derive(Debug, Clone, Copy)]
pub struct ChordHit {
    pub alpha: f64,
    pub row: usize,
    /// Relative gap to the next-closest facet.
    pub margin: f64,
}

pub fn chord_hit(s: &Vector, h: &HPolytope) -> Result<ChordHit> {
    if s.len() != h.dim() {
        bail!(Dimension, "direction has length {}, polytope dimension {}", s.len(), h.dim());
    }
    let mut best = f64::INFINITY;
    let mut second = f64::INFINITY;
    let mut row = usize::MAX;
    for i in 0..h.n_rows() {
        let dot = h.a().row(i).transpose().dot(s);
        if dot > PARALLEL_TOL {
            let ratio = h.b()[i] / dot;
            if ratio < best {
                second = best;
                best = ratio;
                row = i;
            } else if ratio < second {
                second = ratio;
            }
        }
    }
    if row == usize::MAX {
        bail!(Unbounded, "polytope is unbounded along the requested direction");
    }
    let margin = if second.is_finite() { (second - best) / best.abs().max(f64::MIN_POSITIVE) } else { f64::INFINITY };
    Ok(ChordHit { alpha: best, row, margin })
}

/// `alpha_max = min_i b_i / (a_i·s)` over rows with `a_i·s > 0`.
pub fn chord_scale(s: &Vector, h: &HPolytope) -> Result<f64> {
    let n = s.norm();
    if (n - 1.0).abs() > 1e-12 {
        bail!(InvalidInput, "direction must be a unit vector (norm {n})");
    }
    Ok(chord_hit(s, h)?.alpha)
}

pub fn to_ball(v: &Vector, h: &HPolytope, cfg: &BallMapConfig) -> Result<Vector> {
    let k = h.dim();
    let e = cfg.exponent_for(k)?;
    if v.len() != k {
        bail!(Dimension, "point has length {}, polytope dimension {k}", v.len());
    }
    let d = v.norm();
    if d == 0.0 {
        return Ok(Vector::zeros(k));
    }
    let s = v / d;
    let alpha = chord_hit(&s, h)?.alpha;
    let mut r = (d / alpha).powf(e);
    if r >= 1.0 {
        if cfg.closed_ball && r <= 1.0 + 1e-12 {
            r = 1.0;
        } else {
            bail!(OutOfDomain, "point is not strictly inside the polytope (radius {r})");
        }
    }
    Ok(s * r)
}

pub fn from_ball(beta: &Vector, h: &HPolytope, cfg: &BallMapConfig) -> Result<Vector> {
    let k = h.dim();
    let q = 1.0 / cfg.exponent_for(k)?;
    if beta.len() != k {
        bail!(Dimension, "ball point has length {}, dimension {k}", beta.len());
    }
    let r = beta.norm();
    if r == 0.0 {
        return Ok(Vector::zeros(k));
    }
    if r >= 1.0 && !(cfg.closed_ball && r <= 1.0 + 1e-12) {
        bail!(OutOfDomain, "ball point has norm {r} >= 1");
    }
    let s = beta / r;
    let alpha = chord_hit(&s, h)?.alpha;
    Ok(s * (alpha * r.min(1.0).powf(q)))
}

/// Jacobian of `beta -> v` and its log-determinant.
#[derive(Debug, Clone)]
pub struct BallJacobian {
    pub jacobian: Matrix,
    pub log_abs_det: f64,
}

/// Closed-form `log|det dv/dbeta| = ln q + K ln alpha + K (q - 1) ln r`.
///
/// The tangential derivative of `alpha` only shears the map along `s`, so it
/// drops out of the determinant.
pub fn logdet_from_ball(beta: &Vector, h: &HPolytope, cfg: &BallMapConfig) -> Result<f64> {
    let k = h.dim();
    let q = 1.0 / cfg.exponent_for(k)?;
    let r = beta.norm();
    if r == 0.0 {
        return origin_logdet(q);
    }
    let hit = chord_hit(&(beta / r), h)?;
    check_tie(&hit)?;
    let kf = k as f64;
    Ok(q.ln() + kf * hit.alpha.ln() + kf * (q - 1.0) * r.ln())
}

fn origin_logdet(q: f64) -> Result<f64> {
    if q > 1.0 {
        Ok(f64::NEG_INFINITY)
    } else {
        bail!(NonDifferentiable, "with exponent 1 the ball map has a direction-dependent derivative at the origin")
    }
}

fn check_tie(hit: &ChordHit) -> Result<()> {
    if hit.margin < FACET_TIE_TOL {
        bail!(NonDifferentiable, "ray hits two facets within relative margin {:e}", hit.margin);
    }
    Ok(())
}

/// Full Jacobian `dv/dbeta` at a ball point:
///
/// ```text
/// J = alpha r^(q-1) [ (I - s s^T) + q s s^T - s (a - (a·s) s)^T / (a·s) ]
/// ```
/// where `a` is the row of the facet hit along `s`.
pub fn jacobian_from_ball(beta: &Vector, h: &HPolytope, cfg: &BallMapConfig) -> Result<BallJacobian> {
    let k = h.dim();
    let q = 1.0 / cfg.exponent_for(k)?;
    let r = beta.norm();
    if r == 0.0 {
        let ld = origin_logdet(q)?;
        return Ok(BallJacobian { jacobian: Matrix::zeros(k, k), log_abs_det: ld });
    }
    let s = beta / r;
    let hit = chord_hit(&s, h)?;
    check_tie(&hit)?;
    let a = h.a().row(hit.row).transpose();
    let a_s = a.dot(&s);
    let ss = &s * s.transpose();
    let tangential = &a - &s * a_s;
    let mut j = Matrix::identity(k, k) - &ss + ss * q - &s * tangential.transpose() / a_s;
    j *= hit.alpha * r.powf(q - 1.0);
    let kf = k as f64;
    let ld = q.ln() + kf * hit.alpha.ln() + kf * (q - 1.0) * r.ln();
    Ok(BallJacobian { jacobian: j, log_abs_det: ld })
}

/// Jacobians of `beta -> v` at `beta = to_ball(v)` for each row of `vs`.
pub fn jacobian_ball(vs: &Matrix, h: &HPolytope, cfg: &BallMapConfig) -> Result<Vec<BallJacobian>> {
    let mut out = Vec::with_capacity(vs.nrows());
    for row in vs.row_iter() {
        let beta = to_ball(&row.transpose(), h, cfg)?;
        out.push(jacobian_from_ball(&beta, h, cfg)?);
    }
    Ok(out)
}

/// Polar-cylinder coordinates `phi = [theta, c_3..c_K, r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarCylinderPoint {
    pub theta: f64,
    /// `c_3, ..., c_K`.
    pub c: Vector,
    pub r: f64,
}

impl PolarCylinderPoint {
    /// Flattened `[theta, c.., r]`.
    pub fn to_vector(&self) -> Vector {
        let k = self.c.len() + 2;
        let mut v = Vector::zeros(k);
        v[0] = self.theta;
        v.rows_mut(1, k - 2).copy_from(&self.c);
        v[k - 1] = self.r;
        v
    }

    pub fn from_vector(v: &Vector) -> Result<Self> {
        let k = v.len();
        if k < 2 {
            bail!(Dimension, "polar-cylinder coordinates need K >= 2");
        }
        Ok(PolarCylinderPoint { theta: v[0], c: v.rows(1, k - 2).into_owned(), r: v[k - 1] })
    }
}

/// Recursively drops the last coordinate of a unit vector:
/// `c_D = s_D`, `s' = s_{1..D-1} / sqrt(1 - c_D^2)`, down to the circle,
/// where `theta = atan2(s_1, s_2)`.
pub fn cylinder_map(s: &Vector) -> Result<(f64, Vector)> {
    let k = s.len();
    if k < 2 {
        bail!(Dimension, "cylinder map needs K >= 2");
    }
    let mut cur = s.clone();
    let mut c = Vector::zeros(k - 2);
    for d in (3..=k).rev() {
        let cd = cur[d - 1];
        let denom = (1.0 - cd * cd).max(0.0).sqrt();
        if denom <= 1e-12 {
            bail!(NonDifferentiable, "direction is at a pole of the cylinder map");
        }
        c[d - 3] = cd;
        cur = cur.rows(0, d - 1) / denom;
    }
    Ok((cur[0].atan2(cur[1]), c))
}

pub fn inverse_cylinder(theta: f64, c: &Vector) -> Result<Vector> {
    if let Some(bad) = c.iter().find(|x| !(x.abs() < 1.0)) {
        bail!(OutOfDomain, "cylinder coordinate {bad} outside (-1, 1)");
    }
    let k = c.len() + 2;
    let mut s = Vector::zeros(k);
    s[0] = theta.sin();
    s[1] = theta.cos();
    for d in 3..=k {
        let cd = c[d - 3];
        let scale = (1.0 - cd * cd).sqrt();
        for i in 0..d - 1 {
            s[i] *= scale;
        }
        s[d - 1] = cd;
    }
    Ok(s)
}

pub fn to_polar(v: &Vector, h: &HPolytope, cfg: &BallMapConfig) -> Result<PolarCylinderPoint> {
    let beta = to_ball(v, h, cfg)?;
    let r = beta.norm();
    if r == 0.0 {
        bail!(NonDifferentiable, "polar coordinates are undefined at the origin");
    }
    let (theta, c) = cylinder_map(&(beta / r))?;
    Ok(PolarCylinderPoint { theta, c, r })
}

pub fn from_polar(p: &PolarCylinderPoint, h: &HPolytope, cfg: &BallMapConfig) -> Result<Vector> {
    if !(0.0..=1.0).contains(&p.r) {
        bail!(OutOfDomain, "radius {} outside [0, 1]", p.r);
    }
    let s = inverse_cylinder(p.theta, &p.c)?;
    from_ball(&(s * p.r), h, cfg)
}

/// `log|det dv/dphi|` of the chain polar-cylinder -> ball -> polytope:
/// `logdet J^{vbeta} + (K-1) ln r + sum_{j>=3} (j-3)/2 ln(1 - c_j^2)`.
pub fn composite_logdet_from_polar(p: &PolarCylinderPoint, h: &HPolytope, cfg: &BallMapConfig) -> Result<f64> {
    let k = p.c.len() + 2;
    let s = inverse_cylinder(p.theta, &p.c)?;
    let ld_ball = logdet_from_ball(&(s * p.r), h, cfg)?;
    let mut ld = ld_ball + (k as f64 - 1.0) * p.r.ln();
    for j in 3..=k {
        let cj = p.c[j - 3];
        ld += 0.5 * (j as f64 - 3.0) * (1.0 - cj * cj).ln();
    }
    Ok(ld)
}

/// Composite log-determinant for each row of `vs` (points in the polytope).
pub fn composite_logdet_vtheta(vs: &Matrix, h: &HPolytope, cfg: &BallMapConfig) -> Result<Vec<f64>> {
    vs.row_iter()
        .map(|row| {
            let p = to_polar(&row.transpose(), h, cfg)?;
            composite_logdet_from_polar(&p, h, cfg)
        })
        .collect()
}

/// Central finite-difference Jacobian of `f` at `x`.
pub fn finite_difference_jacobian<F>(f: F, x: &Vector, step: f64) -> Result<Matrix>
where
    F: Fn(&Vector) -> Result<Vector>,
{
    let y0 = f(x)?;
    let mut j = Matrix::zeros(y0.len(), x.len());
    for i in 0..x.len() {
        let hstep = step * (1.0 + x[i].abs());
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += hstep;
        xm[i] -= hstep;
        let d = (f(&xp)? - f(&xm)?) / (2.0 * hstep);
        j.set_column(i, &d);
    }
    Ok(j)
}

/// `log|det|` of a finite-difference Jacobian; convenience for tests and
/// diagnostics.
pub fn finite_difference_logdet<F>(f: F, x: &Vector, step: f64) -> Result<f64>
where
    F: Fn(&Vector) -> Result<Vector>,
{
    let j = finite_difference_jacobian(f, x, step)?;
    let ld = log_abs_det(&j);
    if ld.is_nan() {
        bail!(Numerical, "finite-difference Jacobian is not finite");
    }
    Ok(ld)
}
