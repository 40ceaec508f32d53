//! Affine embedding into the free-variable space and rounding to John
//! position.
//!
//! The chain of maps is
//! `v_orig = T v_free + tau` and `v_free = E v + eps`, where `v` lives in
//! the John polytope whose maximum-volume inscribed ellipsoid is the unit
//! ball.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Error, Result};
use crate::linalg::{full_svd, sym_sqrt, Matrix, Vector};
use crate::lp::{solve_inequality_lp, LpStatus};
use crate::polytope::{
    canonicalize, enumerate_vertices, find_implicit_equalities, remove_redundant, CanonicalModel, HPolytope,
    DEFAULT_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingKind {
    Rref,
    Svd,
}

/// `v_orig = T v_free + tau`.
#[derive(Debug, Clone)]
pub struct AffineEmbedding {
    pub t: Matrix,
    pub tau: Vector,
    pub kind: EmbeddingKind,
    pub free_names: Vec<String>,
}

impl AffineEmbedding {
    pub fn identity(names: Vec<String>) -> Self {
        let r = names.len();
        AffineEmbedding { t: Matrix::identity(r, r), tau: Vector::zeros(r), kind: EmbeddingKind::Rref, free_names: names }
    }

    pub fn n_free(&self) -> usize {
        self.t.ncols()
    }
}

/// Ellipsoid `{E y + eps : |y| <= 1}`.
#[derive(Debug, Clone)]
pub struct RoundingTransform {
    pub e: Matrix,
    pub eps: Vector,
}

impl RoundingTransform {
    pub fn identity(k: usize) -> Self {
        RoundingTransform { e: Matrix::identity(k, k), eps: Vector::zeros(k) }
    }
}

/// Original variables <-> free variables <-> rounded (John) variables.
#[derive(Debug, Clone)]
pub struct TransformChain {
    pub embedding: AffineEmbedding,
    pub rounding: RoundingTransform,
    pub john: HPolytope,
    /// Names of the original variables, when known.
    pub variable_names: Vec<String>,
}

impl TransformChain {
    pub fn dim(&self) -> usize {
        self.john.dim()
    }

    /// Rounded variable names (`R_` + free variable name).
    pub fn rounded_names(&self) -> Vec<String> {
        self.embedding.free_names.iter().map(|n| format!("R_{n}")).collect()
    }

    /// `min_i b_i / |a_i|`: radius of the largest origin-centred ball inside
    /// the John polytope.
    pub fn inscribed_radius(&self) -> f64 {
        let norms = self.john.row_norms();
        self.john.b().iter().zip(norms.iter()).map(|(b, n)| b / n).fold(f64::INFINITY, f64::min)
    }

    /// Rounded point -> original variables.
    pub fn lift(&self, v: &Vector) -> Result<Vector> {
        if v.len() != self.dim() {
            bail!(Dimension, "lift expects a vector of length {}, got {}", self.dim(), v.len());
        }
        let free = &self.rounding.e * v + &self.rounding.eps;
        Ok(&self.embedding.t * free + &self.embedding.tau)
    }

    /// Original variables -> rounded point; errors when `x` is off the
    /// affine subspace by more than `1e-6` (relative).
    pub fn unlift(&self, x: &Vector) -> Result<Vector> {
        let t = &self.embedding.t;
        if x.len() != t.nrows() {
            bail!(Dimension, "unlift expects a vector of length {}, got {}", t.nrows(), x.len());
        }
        let shifted = x - &self.embedding.tau;
        let gram = t.transpose() * t;
        let free = gram
            .lu()
            .solve(&(t.transpose() * &shifted))
            .ok_or_else(|| Error::Numerical("embedding matrix lost full column rank".into()))?;
        let resid = (t * &free - &shifted).amax();
        if resid > 1e-6 * (1.0 + x.amax()) {
            bail!(OutOfDomain, "point is {resid:e} away from the affine hull of the polytope");
        }
        let e_lu = self.rounding.e.clone().lu();
        e_lu.solve(&(free - &self.rounding.eps))
            .ok_or_else(|| Error::Numerical("rounding matrix is singular".into()))
    }
}

/// Chebyshev center via `max r` s.t. `a_i·x + r|a_i| <= b_i`, `r >= 0`.
pub fn chebyshev_center(h: &HPolytope) -> Result<(Vector, f64)> {
    chebyshev_center_with_equalities(h, None)
}

/// Chebyshev center of the inequality rows restricted to the affine set
/// `s_plus x = h_plus` (equalities carry no radius term).
pub fn chebyshev_center_with_equalities(h: &HPolytope, equalities: Option<(&Matrix, &Vector)>) -> Result<(Vector, f64)> {
    let k = h.dim();
    let m = h.n_rows();
    let n_eq = equalities.map_or(0, |(s, _)| s.nrows());
    let rows = m + 2 * n_eq + 1;
    let mut a = Matrix::zeros(rows, k + 1);
    let mut b = Vector::zeros(rows);
    let norms = h.row_norms();
    for i in 0..m {
        a.view_mut((i, 0), (1, k)).copy_from(&h.a().row(i));
        a[(i, k)] = norms[i];
        b[i] = h.b()[i];
    }
    if let Some((s, hp)) = equalities {
        if s.ncols() != k || hp.len() != s.nrows() {
            bail!(Dimension, "equality system does not match the polytope dimension");
        }
        for i in 0..n_eq {
            a.view_mut((m + 2 * i, 0), (1, k)).copy_from(&s.row(i));
            b[m + 2 * i] = hp[i];
            a.view_mut((m + 2 * i + 1, 0), (1, k)).copy_from(&(-s.row(i)));
            b[m + 2 * i + 1] = -hp[i];
        }
    }
    a[(rows - 1, k)] = -1.0;
    let mut c = Vector::zeros(k + 1);
    c[k] = 1.0;
    let sol = solve_inequality_lp(&c, &a, &b, true)?;
    match sol.status {
        LpStatus::Optimal => Ok((sol.x.rows(0, k).into_owned(), sol.x[k].max(0.0))),
        LpStatus::Unbounded => bail!(Unbounded, "polytope is not bounded (Chebyshev LP unbounded)"),
        LpStatus::Infeasible => bail!(Infeasible, "polytope is empty"),
    }
}

/// Pivot tolerance relative to the largest entry of the working column.
pub const RREF_PIVOT_TOL: f64 = 1e-10;

/// Row-reduced echelon embedding. Pivots are taken left to right in the
/// original variable order; the non-pivot columns are the free variables.
pub fn rref_embedding(s_plus: &Matrix, h_plus: &Vector, center: &Vector, variable_names: &[String]) -> Result<AffineEmbedding> {
    let r = s_plus.ncols();
    if center.len() != r || variable_names.len() != r || h_plus.len() != s_plus.nrows() {
        bail!(Dimension, "RREF inputs have inconsistent sizes");
    }
    let rows = s_plus.nrows();
    let mut m = Matrix::zeros(rows, r + 1);
    m.view_mut((0, 0), (rows, r)).copy_from(s_plus);
    m.set_column(r, h_plus);
    let col_scale: Vec<f64> = (0..r).map(|j| s_plus.column(j).amax()).collect();
    let global = s_plus.amax().max(1.0);
    let mut pivots = Vec::new();
    let mut prow = 0;
    for j in 0..r {
        if prow == rows {
            break;
        }
        let (best, val) = (prow..rows).map(|i| (i, m[(i, j)].abs())).fold((prow, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        let tol = RREF_PIVOT_TOL * col_scale[j].max(global * 1e-3);
        if val <= tol {
            for i in prow..rows {
                m[(i, j)] = 0.0;
            }
            continue;
        }
        m.swap_rows(prow, best);
        let p = m[(prow, j)];
        for c in 0..=r {
            m[(prow, c)] /= p;
        }
        for i in 0..rows {
            if i != prow {
                let f = m[(i, j)];
                if f != 0.0 {
                    for c in 0..=r {
                        m[(i, c)] -= f * m[(prow, c)];
                    }
                }
            }
        }
        pivots.push(j);
        prow += 1;
    }
    for i in prow..rows {
        if m[(i, r)].abs() > 1e-8 * (1.0 + h_plus.amax()) {
            bail!(Infeasible, "inconsistent equality system (row {i} reduces to 0 = {})", m[(i, r)]);
        }
    }
    let free: Vec<usize> = (0..r).filter(|j| !pivots.contains(j)).collect();
    let k = free.len();
    let mut t = Matrix::zeros(r, k);
    for (c, &j) in free.iter().enumerate() {
        t[(j, c)] = 1.0;
        for (pi, &pj) in pivots.iter().enumerate() {
            t[(pj, c)] = -m[(pi, j)];
        }
    }
    let center_free = Vector::from_iterator(k, free.iter().map(|&j| center[j]));
    let tau = center - &t * center_free;
    Ok(AffineEmbedding {
        t,
        tau,
        kind: EmbeddingKind::Rref,
        free_names: free.iter().map(|&j| variable_names[j].clone()).collect(),
    })
}

/// Relative singular-value threshold for the SVD null space.
pub const SVD_NULL_TOL: f64 = 1e-10;

/// Orthonormal null-space embedding through the SVD of `s_plus`.
pub fn svd_embedding(s_plus: &Matrix, center: &Vector) -> Result<AffineEmbedding> {
    let r = s_plus.ncols();
    if center.len() != r {
        bail!(Dimension, "center has length {}, expected {r}", center.len());
    }
    let names = |k: usize| (0..k).map(|i| format!("svd_{i}")).collect::<Vec<_>>();
    if s_plus.nrows() == 0 || s_plus.amax() == 0.0 {
        return Ok(AffineEmbedding { t: Matrix::identity(r, r), tau: center.clone(), kind: EmbeddingKind::Svd, free_names: names(r) });
    }
    let (sv, v) = full_svd(s_plus);
    let thresh = SVD_NULL_TOL * sv[0];
    if let Some(&amb) = sv.iter().find(|&&s| s > thresh / 10.0 && s < thresh * 10.0) {
        bail!(Numerical, "rank decision is ambiguous: singular value {amb:e} within 10x of threshold {thresh:e}; supply K explicitly");
    }
    let rank = sv.iter().filter(|&&s| s >= thresh).count();
    let k = r - rank;
    let t = v.columns(rank, k).into_owned();
    Ok(AffineEmbedding { t, tau: center.clone(), kind: EmbeddingKind::Svd, free_names: names(k) })
}

/// `A' = A T`, `b' = b - A tau`; rows that vanish (absorbed equalities) are
/// dropped.
pub fn project_to_full_dim(h: &HPolytope, emb: &AffineEmbedding) -> Result<HPolytope> {
    if h.dim() != emb.t.nrows() {
        bail!(Dimension, "polytope dimension {} does not match embedding with {} rows", h.dim(), emb.t.nrows());
    }
    let a = h.a() * &emb.t;
    let b = h.b() - h.a() * &emb.tau;
    let norms = h.row_norms();
    let mut keep = Vec::new();
    for i in 0..a.nrows() {
        if a.row(i).norm() > 1e-9 * norms[i] {
            keep.push(i);
        } else if b[i] < -1e-7 * (1.0 + h.b()[i].abs()) {
            bail!(Infeasible, "absorbed row {i} is violated by {}", -b[i]);
        }
    }
    let a = a.select_rows(keep.iter());
    let b = Vector::from_iterator(keep.len(), keep.iter().map(|&i| b[i]));
    HPolytope::new(a, b)
}

#[derive(Debug, Clone, Copy)]
pub struct MveOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Fraction-to-boundary factor for the damped Newton steps.
    pub step_fraction: f64,
}

impl Default for MveOptions {
    fn default() -> Self {
        MveOptions { tol: 1e-8, max_iter: 200, step_fraction: 0.99 }
    }
}

/// Maximum-volume inscribed ellipsoid by a primal-dual interior-point
/// method on the optimality system
///
/// ```text
/// E^2 = (A^T Y A)^{-1},  h_i = |E a_i|,
/// A^T (y ∘ h) = 0,  b - A x - h - z = 0,  y ∘ z = mu,
/// ```
///
/// with `y, z > 0` and `mu -> 0`. Rows are first rescaled around the
/// Chebyshev center so the right-hand side is all ones.
pub fn max_volume_ellipsoid(h: &HPolytope, opts: MveOptions) -> Result<RoundingTransform> {
    let (x0, radius) = chebyshev_center(h)?;
    if radius <= 0.0 {
        bail!(InvalidInput, "polytope is not full-dimensional (Chebyshev radius {radius})");
    }
    let (e, x) = mve_newton(h, &x0, true, opts)?;
    Ok(RoundingTransform { e, eps: x })
}

/// Maximum-volume inscribed ellipsoid with the center held at `center`.
pub fn max_volume_ellipsoid_fixed_center(h: &HPolytope, center: &Vector, opts: MveOptions) -> Result<RoundingTransform> {
    if !h.strictly_contains(center) {
        bail!(OutOfDomain, "fixed ellipsoid center must be strictly interior");
    }
    let (e, x) = mve_newton(h, center, false, opts)?;
    Ok(RoundingTransform { e, eps: x })
}

fn mve_newton(h: &HPolytope, x0: &Vector, move_center: bool, opts: MveOptions) -> Result<(Matrix, Vector)> {
    let k = h.dim();
    let m = h.n_rows();
    let slack0 = h.slack(x0);
    if slack0.iter().any(|&s| s <= 0.0) {
        bail!(OutOfDomain, "starting point is not interior");
    }
    let mut a = h.a().clone();
    for i in 0..m {
        let s = slack0[i];
        a.row_mut(i).scale_mut(1.0 / s);
    }
    let at = a.transpose();
    let min_mu = 1e-14;
    let mut x = Vector::zeros(k);
    let mut y = Vector::from_element(m, 1.0);
    let mut z;
    {
        let (_, hh, _) = ellipsoid_terms(&a, &at, &y)?;
        let t = hh.iter().map(|&v| 1.0 / v).fold(f64::INFINITY, f64::min);
        y /= t * t;
        let hh = hh * t;
        z = Vector::from_iterator(m, hh.iter().map(|&v| (1.0 - v).max(0.1)));
    }
    let mut residual = f64::INFINITY;
    for _iter in 0..opts.max_iter {
        let (e2, hh, q) = ellipsoid_terms(&a, &at, &y)?;
        let bmax = Vector::from_element(m, 1.0) - &a * &x;
        let r1 = if move_center { &at * y.component_mul(&hh) } else { Vector::zeros(k) };
        let r2 = &bmax - &hh - &z;
        let yz = y.component_mul(&z);
        let gap = yz.sum() / m as f64;
        let mu = (gap.min(0.5) * gap).max(min_mu);
        let r3 = Vector::from_element(m, mu) - &yz;
        residual = r1.amax().max(r2.amax()).max(gap);
        if r1.amax() < opts.tol && r2.amax() < opts.tol && gap < opts.tol {
            let e = sym_sqrt(&e2);
            return Ok((e, x0 + x));
        }
        // dh/dy = -(Q ∘ Q) / (2 h)
        let mut dh = Matrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                dh[(i, j)] = -q[(i, j)] * q[(i, j)] / (2.0 * hh[i]);
            }
        }
        let nk = if move_center { k } else { 0 };
        let n = nk + 2 * m;
        let mut jac = Matrix::zeros(n, n);
        let mut rhs = Vector::zeros(n);
        if move_center {
            // A^T (diag(h) + diag(y) Dh) dy = -R1
            let mut inner = Matrix::from_diagonal(&hh);
            for i in 0..m {
                for j in 0..m {
                    inner[(i, j)] += y[i] * dh[(i, j)];
                }
            }
            jac.view_mut((0, nk), (k, m)).copy_from(&(&at * inner));
            rhs.rows_mut(0, k).copy_from(&(-&r1));
            // -A dx - Dh dy - dz = -R2
            jac.view_mut((nk, 0), (m, k)).copy_from(&(-&a));
        }
        jac.view_mut((nk, nk), (m, m)).copy_from(&(-&dh));
        for i in 0..m {
            jac[(nk + i, nk + m + i)] = -1.0;
            jac[(nk + m + i, nk + i)] = z[i];
            jac[(nk + m + i, nk + m + i)] = y[i];
        }
        rhs.rows_mut(nk, m).copy_from(&(-&r2));
        rhs.rows_mut(nk + m, m).copy_from(&r3);
        let step = jac.lu().solve(&rhs).ok_or_else(|| Error::Numerical("singular Newton system in MVE solver".into()))?;
        let dx = step.rows(0, nk).into_owned();
        let dy = step.rows(nk, m).into_owned();
        let dz = step.rows(nk + m, m).into_owned();
        let mut alpha: f64 = 1.0;
        for i in 0..m {
            if dy[i] < 0.0 {
                alpha = alpha.min(-opts.step_fraction * y[i] / dy[i]);
            }
            if dz[i] < 0.0 {
                alpha = alpha.min(-opts.step_fraction * z[i] / dz[i]);
            }
        }
        if move_center {
            x += &dx * alpha;
        }
        y += &dy * alpha;
        z += &dz * alpha;
    }
    Err(Error::NotConverged { iterations: opts.max_iter, residual })
}

/// Returns `(E^2, h, Q)` for dual weights `y`.
fn ellipsoid_terms(a: &Matrix, at: &Matrix, y: &Vector) -> Result<(Matrix, Vector, Matrix)> {
    let mut ya = a.clone();
    for (i, mut row) in ya.row_iter_mut().enumerate() {
        row *= y[i];
    }
    let gram = at * ya;
    let chol = gram.cholesky().ok_or_else(|| Error::Numerical("A^T Y A is not positive definite".into()))?;
    let e2 = chol.inverse();
    let q = a * &e2 * at;
    let hh = Vector::from_iterator(a.nrows(), (0..a.nrows()).map(|i| q[(i, i)].max(0.0).sqrt()));
    Ok((e2, hh, q))
}

/// `A = A' E`, `b = b' - A' eps`.
pub fn john_polytope(h: &HPolytope, r: &RoundingTransform) -> Result<HPolytope> {
    if r.e.nrows() != h.dim() {
        bail!(Dimension, "rounding transform of size {} for polytope of dimension {}", r.e.nrows(), h.dim());
    }
    HPolytope::new(h.a() * &r.e, h.b() - h.a() * &r.eps)
}

/// Radius `Phi` of an origin-centred ball containing the polytope. Uses the
/// exact largest vertex norm when enumeration is cheap and a bounding-box
/// corner otherwise.
pub fn circumscribed_radius(h: &HPolytope) -> Result<f64> {
    if let Ok(v) = enumerate_vertices(h, 1e-9, 2_000_000) {
        return Ok(v.vertices().column_iter().map(|c| c.norm()).fold(0.0, f64::max));
    }
    let k = h.dim();
    let mut sq = 0.0;
    for j in 0..k {
        let mut c = Vector::zeros(k);
        c[j] = 1.0;
        let hi = solve_inequality_lp(&c, h.a(), h.b(), true)?;
        let lo = solve_inequality_lp(&c, h.a(), h.b(), false)?;
        if hi.status != LpStatus::Optimal || lo.status != LpStatus::Optimal {
            bail!(Unbounded, "polytope is not bounded along axis {j}");
        }
        let r = hi.objective.abs().max(lo.objective.abs());
        sq += r * r;
    }
    Ok(sq.sqrt())
}

#[derive(Debug, Clone, Copy)]
pub struct RoundingOptions {
    pub embedding: EmbeddingKind,
    pub tol: f64,
    pub mve: MveOptions,
}

impl Default for RoundingOptions {
    fn default() -> Self {
        RoundingOptions { embedding: EmbeddingKind::Rref, tol: DEFAULT_TOL, mve: MveOptions::default() }
    }
}

/// Full pipeline: canonical model -> John polytope.
pub fn round_model(model: &CanonicalModel, opts: RoundingOptions) -> Result<TransformChain> {
    let h = canonicalize(model)?;
    round_polytope(&h, &model.variable_names, opts)
}

/// Implicit equalities -> embedding -> full-dimensional projection ->
/// redundancy removal -> MVE -> John polytope.
pub fn round_polytope(h: &HPolytope, variable_names: &[String], opts: RoundingOptions) -> Result<TransformChain> {
    if variable_names.len() != h.dim() {
        bail!(Dimension, "{} names for a polytope in dimension {}", variable_names.len(), h.dim());
    }
    let eq = find_implicit_equalities(h, opts.tol)?;
    let (center, _) = if eq.s_plus.nrows() > 0 {
        chebyshev_center_with_equalities(&eq.residual, Some((&eq.s_plus, &eq.h_plus)))?
    } else {
        chebyshev_center(h)?
    };
    let embedding = match opts.embedding {
        EmbeddingKind::Rref => rref_embedding(&eq.s_plus, &eq.h_plus, &center, variable_names)?,
        EmbeddingKind::Svd => svd_embedding(&eq.s_plus, &center)?,
    };
    let full = project_to_full_dim(&eq.residual, &embedding)?;
    let full = remove_redundant(&full, opts.tol)?;
    let rounding = max_volume_ellipsoid(&full, opts.mve)?;
    let john = john_polytope(&full, &rounding)?;
    Ok(TransformChain { embedding, rounding, john, variable_names: variable_names.to_vec() })
}

/// Rounds an already full-dimensional polytope (identity embedding).
pub fn round_full_dimensional(h: &HPolytope, opts: MveOptions) -> Result<TransformChain> {
    let names: Vec<String> = (0..h.dim()).map(|i| format!("x{i}")).collect();
    let rounding = max_volume_ellipsoid(h, opts)?;
    let john = john_polytope(h, &rounding)?;
    Ok(TransformChain { embedding: AffineEmbedding::identity(names.clone()), rounding, john, variable_names: names })
}

#[allow(dead_code)]
fn unit(k: usize, i: usize) -> Vector {
    let mut v = Vector::from_vec(vec![0.0; k]);
    v[i] = 1.0;
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn triangle() -> HPolytope {
        // conv{(0,0),(4,0),(0,3)}: x >= 0, y >= 0, 3x + 4y <= 12
        let a = Matrix::from_row_slice(3, 2, &[-1.0, 0.0, 0.0, -1.0, 3.0, 4.0]);
        HPolytope::new(a, Vector::from_vec(vec![0.0, 0.0, 12.0])).unwrap()
    }

    #[test]
    fn chebyshev_of_square() {
        let (c, r) = chebyshev_center(&HPolytope::cube(2)).unwrap();
        assert!(c.amax() < 1e-12);
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chebyshev_of_triangle_is_incenter() {
        // incenter (a A + b B + c C)/(a + b + c) with side lengths opposite
        // each vertex
        let (pa, pb, pc) = ([0.0, 0.0], [4.0, 0.0], [0.0, 3.0]);
        let (la, lb, lc) = (5.0, 3.0, 4.0);
        let p = la + lb + lc;
        let inc = [(la * pa[0] + lb * pb[0] + lc * pc[0]) / p, (la * pa[1] + lb * pb[1] + lc * pc[1]) / p];
        let (c, r) = chebyshev_center(&triangle()).unwrap();
        assert!((c[0] - inc[0]).abs() < 1e-10 && (c[1] - inc[1]).abs() < 1e-10);
        assert!((r - 1.0).abs() < 1e-10);
    }

    #[test]
    fn chebyshev_of_flat_segment_has_zero_radius() {
        // x = y, 0 <= x <= 1
        let a = Matrix::from_row_slice(4, 2, &[1.0, -1.0, -1.0, 1.0, 1.0, 0.0, -1.0, 0.0]);
        let h = HPolytope::new(a, Vector::from_vec(vec![0.0, 0.0, 1.0, 0.0])).unwrap();
        let (_, r) = chebyshev_center(&h).unwrap();
        assert!(r.abs() < 1e-12);
    }

    #[test]
    fn rref_of_empty_system_is_identity() {
        let names: Vec<String> = vec!["a".into(), "b".into()];
        let e = rref_embedding(&Matrix::zeros(0, 2), &Vector::zeros(0), &Vector::zeros(2), &names).unwrap();
        assert_eq!(e.t, Matrix::identity(2, 2));
        assert_eq!(e.tau, Vector::zeros(2));
    }

    #[test]
    fn rref_of_sum_constraint() {
        // x + y = 1; y is free, x = 1 - y
        let names: Vec<String> = vec!["x".into(), "y".into()];
        let s = Matrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let center = Vector::from_vec(vec![0.5, 0.5]);
        let e = rref_embedding(&s, &Vector::from_vec(vec![1.0]), &center, &names).unwrap();
        assert_eq!(e.free_names, vec![String::from("y")]);
        assert_eq!(e.t, Matrix::from_row_slice(2, 1, &[-1.0, 1.0]));
        assert!((e.tau - Vector::from_vec(vec![1.0, 0.0])).amax() < 1e-14);
    }

    #[test]
    fn rref_detects_inconsistency() {
        let names: Vec<String> = vec!["x".into(), "y".into()];
        let s = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        let r = rref_embedding(&s, &Vector::from_vec(vec![1.0, 3.0]), &Vector::zeros(2), &names);
        assert!(matches!(r, Err(Error::Infeasible(_))));
    }

    #[test]
    fn svd_embedding_of_sum_zero() {
        let s = Matrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let e = svd_embedding(&s, &Vector::zeros(2)).unwrap();
        assert_eq!(e.n_free(), 1);
        let d = e.t.column(0);
        assert!((d[0].abs() - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((d[0] + d[1]).abs() < 1e-12);
    }

    #[test]
    fn svd_embedding_of_empty_system() {
        let e = svd_embedding(&Matrix::zeros(0, 3), &Vector::zeros(3)).unwrap();
        assert_eq!(e.t, Matrix::identity(3, 3));
    }

    #[test]
    fn identity_embedding_keeps_polytope() {
        let h = HPolytope::cube(2);
        let e = AffineEmbedding::identity(vec!["a".into(), "b".into()]);
        assert_eq!(project_to_full_dim(&h, &e).unwrap(), h);
    }

    #[test]
    fn mve_of_cube_is_unit_ball() {
        for k in 1..=4 {
            let r = max_volume_ellipsoid(&HPolytope::cube(k), MveOptions::default()).unwrap();
            assert!((r.e.clone() - Matrix::identity(k, k)).amax() < 1e-6, "{}", r.e);
            assert!(r.eps.amax() < 1e-6);
        }
    }

    #[test]
    fn mve_of_rectangle() {
        let h = HPolytope::from_box(&[-2.0, -1.0], &[2.0, 1.0]).unwrap();
        let r = max_volume_ellipsoid(&h, MveOptions::default()).unwrap();
        let want = Matrix::from_diagonal(&Vector::from_vec(vec![2.0, 1.0]));
        assert!((r.e - want).amax() < 1e-6);
        assert!(r.eps.amax() < 1e-6);
        let chain = round_full_dimensional(&h, MveOptions::default()).unwrap();
        assert!((chain.inscribed_radius() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn mve_of_triangle_contains_incircle_volume() {
        let h = triangle();
        let r = max_volume_ellipsoid(&h, MveOptions::default()).unwrap();
        // containment: |E a_i| + a_i eps <= b_i
        for i in 0..h.n_rows() {
            let a = h.a().row(i).transpose();
            let lhs = (&r.e * &a).norm() + a.dot(&r.eps);
            assert!(lhs <= h.b()[i] + 1e-8);
        }
        // triangle MVE is the Steiner inellipse: area = pi * area(T) / (3 sqrt 3)
        let det = r.e.determinant();
        assert!(det >= 1.0);
        let steiner = 6.0 / (3.0 * 3f64.sqrt());
        assert!((det - steiner).abs() < 1e-6, "{det} vs {steiner}");
    }

    #[test]
    fn lift_of_origin_is_center() {
        let h = HPolytope::from_box(&[0.0, 0.0], &[4.0, 2.0]).unwrap();
        let chain = round_full_dimensional(&h, MveOptions::default()).unwrap();
        let x = chain.lift(&Vector::zeros(2)).unwrap();
        assert!((x - Vector::from_vec(vec![2.0, 1.0])).amax() < 1e-6);
    }

    #[test]
    fn unlift_rejects_points_off_the_subspace() {
        let names: Vec<String> = vec!["x".into(), "y".into()];
        let s = Matrix::from_row_slice(1, 2, &[1.0, -1.0]);
        let model = CanonicalModel::with_bounds(s, Vector::zeros(1), None, &[(0.0, 1.0), (0.0, 1.0)], names).unwrap();
        let chain = round_model(&model, RoundingOptions::default()).unwrap();
        assert_eq!(chain.dim(), 1);
        let p = chain.lift(&Vector::from_vec(vec![0.3])).unwrap();
        assert!((p[0] - p[1]).abs() < 1e-12);
        let back = chain.unlift(&p).unwrap();
        assert!((back[0] - 0.3).abs() < 1e-12);
        assert!(chain.unlift(&Vector::from_vec(vec![0.2, 0.6])).is_err());
    }
}
