//! Coordinates for V-polytopes: maximum-entropy barycentric coordinates,
//! the isometric log-ratio transform and a standardised projection onto
//! the `K`-dimensional image.
//!
//! The composite map is `v -> lambda -> z = H ln(lambda) -> z^t`, with
//! `z^t = (P (z - zbar) - mu) / sigma`.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{bail, Error, Result};
use crate::linalg::{full_svd, log_abs_det, log_sum_exp, Matrix, Vector};
use crate::polytope::VPolytope;

/// Smallest admissible barycentric weight.
pub const LAMBDA_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy)]
pub struct MecOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MecOptions {
    fn default() -> Self {
        MecOptions { tol: 1e-10, max_iter: 100 }
    }
}

/// `lambda(eta) = softmax(Vc^T eta)` for vertices `Vc` recentred at the
/// query point, and the dual objective `ln sum exp`.
fn dual_weights(vct: &Matrix, eta: &Vector) -> (Vector, f64) {
    let logits: Vec<f64> = (vct * eta).iter().copied().collect();
    let lse = log_sum_exp(&logits);
    (Vector::from_iterator(logits.len(), logits.iter().map(|x| (x - lse).exp())), lse)
}

/// Maximum-entropy coordinates of `v`: the `lambda` maximizing
/// `-sum lambda_i ln lambda_i` subject to `V lambda = v`, `1^T lambda = 1`.
///
/// Solved by damped Newton on the convex dual
/// `eta -> ln sum_i exp(eta · (v_i - v))` starting from `eta = 0`; steps are
/// backtracked until either the dual objective or the constraint residual
/// decreases.
pub fn mec(v: &Vector, vp: &VPolytope, opts: MecOptions) -> Result<Vector> {
    let lam = mec_log(v, vp, opts)?.map(f64::exp);
    if lam.min() < LAMBDA_FLOOR {
        bail!(OutOfDomain, "point is on the boundary of the polytope (weight underflow)");
    }
    Ok(lam)
}

/// Indices of the rows of `points` whose smallest `ln lambda` is at least
/// `floor`. Points very close to a facet have log-weights in the hundreds
/// or thousands; a few of them dominate the ilr mean and spread.
pub fn rows_above_log_weight_floor(points: &Matrix, vp: &VPolytope, floor: f64, opts: MecOptions) -> Result<Vec<usize>> {
    let mut keep = Vec::with_capacity(points.nrows());
    for (i, row) in points.row_iter().enumerate() {
        if mec_log(&row.transpose(), vp, opts)?.min() >= floor {
            keep.push(i);
        }
    }
    Ok(keep)
}

/// `ln lambda` of [`mec`], computed in the dual so that weights far below
/// the floating-point range stay finite for points close to a facet.
pub fn mec_log(v: &Vector, vp: &VPolytope, opts: MecOptions) -> Result<Vector> {
    let verts = vp.vertices();
    let k = verts.nrows();
    if v.len() != k {
        bail!(Dimension, "point has length {}, vertices have dimension {k}", v.len());
    }
    let mut vc = verts.clone();
    for mut c in vc.column_iter_mut() {
        c -= v;
    }
    let vct = vc.transpose();
    let tol = opts.tol * verts.amax().max(1.0);
    let mut eta = Vector::zeros(k);
    let (mut lam, mut f) = dual_weights(&vct, &eta);
    let log_weights = |eta: &Vector| {
        let logits = &vct * eta;
        let lse = log_sum_exp(logits.as_slice());
        logits.add_scalar(-lse)
    };
    let mut grad = &vc * &lam;
    let mut resid = grad.amax();
    for _ in 0..opts.max_iter {
        if !f.is_finite() {
            break;
        }
        if resid < tol {
            let log_lam = log_weights(&eta);
            if !log_lam.iter().all(|x| x.is_finite()) {
                bail!(OutOfDomain, "point is on the boundary of the polytope");
            }
            return Ok(log_lam);
        }
        // covariance of the vertices under lambda
        let mut centered = vc.clone();
        for mut c in centered.column_iter_mut() {
            c -= &grad;
        }
        let mut weighted = centered.clone();
        for (j, mut c) in weighted.column_iter_mut().enumerate() {
            c *= lam[j];
        }
        let hess = &weighted * centered.transpose();
        let step = match hess.cholesky() {
            Some(ch) => ch.solve(&grad),
            None => bail!(Numerical, "vertex covariance is singular; vertices do not span the space"),
        };
        let slope = grad.dot(&step);
        let mut t = 1.0;
        loop {
            let trial = &eta - &step * t;
            let (l2, f2) = dual_weights(&vct, &trial);
            let g2 = &vc * &l2;
            let r2 = g2.amax();
            if f2 <= f - 1e-4 * t * slope || r2 < (1.0 - 1e-4 * t) * resid || t < 1e-10 {
                eta = trial;
                lam = l2;
                f = f2;
                grad = g2;
                resid = r2;
                break;
            }
            t *= 0.5;
        }
    }
    Err(Error::NotConverged { iterations: opts.max_iter, residual: resid })
}

fn check_open_simplex(lambda: &Vector) -> Result<()> {
    if lambda.iter().any(|&l| !(l >= LAMBDA_FLOOR)) {
        bail!(OutOfDomain, "barycentric weights must be strictly positive");
    }
    if (lambda.sum() - 1.0).abs() > 1e-10 {
        bail!(OutOfDomain, "barycentric weights must sum to one (sum {})", lambda.sum());
    }
    Ok(())
}

/// `v = V lambda`.
pub fn mec_inverse(lambda: &Vector, vp: &VPolytope) -> Result<Vector> {
    if lambda.len() != vp.n_vertices() {
        bail!(Dimension, "{} weights for {} vertices", lambda.len(), vp.n_vertices());
    }
    check_open_simplex(lambda)?;
    Ok(vp.vertices() * lambda)
}

/// Orthonormal contrast basis (Helmert), `(n-1) x n`.
#[derive(Debug, Clone, PartialEq)]
pub struct IlrBasis {
    pub h: Matrix,
}

impl IlrBasis {
    pub fn helmert(n_parts: usize) -> Result<Self> {
        if n_parts < 2 {
            bail!(InvalidInput, "ilr needs at least two parts");
        }
        let mut h = Matrix::zeros(n_parts - 1, n_parts);
        for i in 1..n_parts {
            let scale = (i as f64 / (i as f64 + 1.0)).sqrt();
            for j in 0..i {
                h[(i - 1, j)] = scale / i as f64;
            }
            h[(i - 1, i)] = -scale;
        }
        Ok(IlrBasis { h })
    }

    pub fn n_parts(&self) -> usize {
        self.h.ncols()
    }
}

/// `z = H ln(lambda)`.
pub fn ilr(lambda: &Vector, basis: &IlrBasis) -> Result<Vector> {
    if lambda.len() != basis.n_parts() {
        bail!(Dimension, "composition of length {} for a basis of {} parts", lambda.len(), basis.n_parts());
    }
    if lambda.iter().any(|&l| !(l >= LAMBDA_FLOOR)) {
        bail!(OutOfDomain, "composition has a non-positive or underflowing part");
    }
    Ok(&basis.h * lambda.map(f64::ln))
}

/// `z = H ln(lambda)` from log-weights; any common offset cancels.
pub fn ilr_from_log(log_lambda: &Vector, basis: &IlrBasis) -> Result<Vector> {
    if log_lambda.len() != basis.n_parts() {
        bail!(Dimension, "composition of length {} for a basis of {} parts", log_lambda.len(), basis.n_parts());
    }
    if !log_lambda.iter().all(|x| x.is_finite()) {
        bail!(OutOfDomain, "log-composition has a non-finite part");
    }
    Ok(&basis.h * log_lambda)
}

/// `lambda = softmax(H^T z)`.
pub fn ilr_inv(z: &Vector, basis: &IlrBasis) -> Result<Vector> {
    if z.len() + 1 != basis.n_parts() {
        bail!(Dimension, "ilr vector of length {} for a basis of {} parts", z.len(), basis.n_parts());
    }
    let logits: Vec<f64> = (basis.h.transpose() * z).iter().copied().collect();
    let lse = log_sum_exp(&logits);
    Ok(Vector::from_iterator(logits.len(), logits.iter().map(|x| (x - lse).exp())))
}

/// Centred projection onto the top `K` right-singular directions plus a
/// standardiser.
#[derive(Debug, Clone, PartialEq)]
pub struct IlrProjection {
    /// `K x V`, orthonormal rows.
    pub p: Matrix,
    pub zbar: Vector,
    pub mu: Vector,
    pub sigma: Vector,
    /// Singular values of the centred training matrix, descending.
    pub singular_values: Vector,
}

/// Relative size of `sigma_{K+1}` below which the image counts as
/// `K`-dimensional.
pub const RANK_GAP_TOL: f64 = 1e-8;

/// Fits the projection to the rows of `z` (`n x V`).
pub fn fit_projection(z: &Matrix, k: usize) -> Result<IlrProjection> {
    let (n, dim) = z.shape();
    if k == 0 || k > dim {
        bail!(InvalidInput, "projection rank {k} must lie in 1..={dim}");
    }
    if n < k + 1 {
        bail!(InvalidInput, "need at least {} points to fit a rank-{k} projection, got {n}", k + 1);
    }
    let zbar = Vector::from_iterator(dim, z.column_iter().map(|c| c.mean()));
    let mut centered = z.clone();
    for mut row in centered.row_iter_mut() {
        row -= zbar.transpose();
    }
    let (sv, v) = full_svd(&centered);
    let s1 = sv[0];
    if !(s1 > 0.0) || sv[k - 1] / s1 < RANK_GAP_TOL {
        bail!(Numerical, "training points span fewer than {k} dimensions");
    }
    if k < sv.len() && sv[k] / s1 >= RANK_GAP_TOL {
        bail!(Numerical, "training points span more than {k} dimensions (sigma_{} / sigma_1 = {:e})", k + 1, sv[k] / s1);
    }
    let p = v.columns(0, k).transpose();
    let zp = &centered * p.transpose();
    let mu = Vector::from_iterator(k, zp.column_iter().map(|c| c.mean()));
    let sigma = Vector::from_iterator(k, zp.column_iter().zip(mu.iter()).map(|(c, m)| (c.map(|x| (x - m) * (x - m)).mean()).sqrt()));
    if sigma.iter().any(|&s| !(s > 0.0)) {
        bail!(Numerical, "projected coordinates have zero spread");
    }
    Ok(IlrProjection { p, zbar, mu, sigma, singular_values: sv })
}

impl IlrProjection {
    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    pub fn standardize(&self, z: &Vector) -> Vector {
        (&self.p * (z - &self.zbar) - &self.mu).component_div(&self.sigma)
    }

    pub fn unstandardize(&self, zt: &Vector) -> Vector {
        self.p.transpose() * (zt.component_mul(&self.sigma) + &self.mu) + &self.zbar
    }
}

/// The full chain `v <-> z^t` for one V-polytope.
#[derive(Debug, Clone)]
pub struct AitchisonMap {
    pub vertices: VPolytope,
    pub basis: IlrBasis,
    pub projection: IlrProjection,
    pub mec: MecOptions,
}

impl AitchisonMap {
    /// Fits the projection to the ilr images of `training` (rows are points
    /// inside the polytope).
    pub fn fit(vertices: VPolytope, training: &Matrix, opts: MecOptions) -> Result<Self> {
        let k = vertices.dim();
        let basis = IlrBasis::helmert(vertices.n_vertices())?;
        let mut z = Matrix::zeros(training.nrows(), basis.n_parts() - 1);
        for (i, row) in training.row_iter().enumerate() {
            let log_lam = mec_log(&row.transpose(), &vertices, opts)?;
            z.row_mut(i).copy_from(&ilr_from_log(&log_lam, &basis)?.transpose());
        }
        let projection = fit_projection(&z, k)?;
        Ok(AitchisonMap { vertices, basis, projection, mec: opts })
    }

    pub fn to_zt(&self, v: &Vector) -> Result<Vector> {
        let log_lam = mec_log(v, &self.vertices, self.mec)?;
        Ok(self.projection.standardize(&ilr_from_log(&log_lam, &self.basis)?))
    }

    pub fn from_zt(&self, zt: &Vector) -> Result<Vector> {
        let lam = ilr_inv(&self.projection.unstandardize(zt), &self.basis)?;
        Ok(self.vertices.vertices() * lam)
    }

    /// `dv/dz^t = V (diag(lambda) - lambda lambda^T) H^T P^T diag(sigma)`.
    pub fn jacobian_vt(&self, zt: &Vector) -> Result<Matrix> {
        let lam = ilr_inv(&self.projection.unstandardize(zt), &self.basis)?;
        let soft = Matrix::from_diagonal(&lam) - &lam * lam.transpose();
        let mut pt = self.projection.p.transpose();
        for (j, mut c) in pt.column_iter_mut().enumerate() {
            c *= self.projection.sigma[j];
        }
        Ok(self.vertices.vertices() * soft * self.basis.h.transpose() * pt)
    }

    pub fn logdet_jvt(&self, zt: &Vector) -> Result<f64> {
        let ld = log_abs_det(&self.jacobian_vt(zt)?);
        if !(ld > -690.0) {
            bail!(Numerical, "Jacobian of the ilr chain is numerically singular");
        }
        Ok(ld)
    }

    /// Log-determinants for each row of `zts`.
    pub fn logdet_jvt_batch(&self, zts: &Matrix) -> Result<Vec<f64>> {
        zts.row_iter().map(|r| self.logdet_jvt(&r.transpose())).collect()
    }
}

/// Shannon entropy `-sum lambda ln lambda`.
pub fn entropy(lambda: &Vector) -> f64 {
    -lambda.iter().filter(|&&l| l > 0.0).map(|l| l * l.ln()).sum::<f64>()
}
