//! State spaces of the flows and their projection operators.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{bail, Error, Result};
use crate::polytope::{HPolytope, VPolytope};

/// Default tolerance of the iterative polytope projections.
pub const PROJECTION_TOL: f64 = 1e-12;
/// Cycle limit of the iterative polytope projections.
pub const PROJECTION_MAX_ITER: usize = 100_000;

/// Where the flow state lives and how it is pulled back after a step.
#[derive(Debug, Clone, PartialEq)]
pub enum ManifoldSpec {
    /// `lo <= x <= hi`, projected by clamping.
    EuclideanBox { lo: Vec<f64>, hi: Vec<f64> },
    /// `A x <= b`; projected by Dykstra's method only when `project` is set.
    EuclideanPolytope { h: HPolytope, project: bool },
    /// Closed unit ball, projected by `y / max(1, |y|)`.
    UnitBall,
    /// Unconstrained standardized ilr coordinates.
    IlrSpace,
}

impl ManifoldSpec {
    pub fn dim(&self) -> Option<usize> {
        match self {
            ManifoldSpec::EuclideanBox { lo, .. } => Some(lo.len()),
            ManifoldSpec::EuclideanPolytope { h, .. } => Some(h.dim()),
            ManifoldSpec::UnitBall | ManifoldSpec::IlrSpace => None,
        }
    }

    /// Projects one point in place.
    pub fn project(&self, y: &mut [f64]) -> Result<()> {
        match self {
            ManifoldSpec::EuclideanBox { lo, hi } => {
                project_box(y, lo, hi);
                Ok(())
            }
            ManifoldSpec::EuclideanPolytope { h, project } => {
                if *project {
                    let p = project_halfspaces(h, y, PROJECTION_TOL, PROJECTION_MAX_ITER)?;
                    y.copy_from_slice(&p);
                }
                Ok(())
            }
            ManifoldSpec::UnitBall => {
                project_ball(y);
                Ok(())
            }
            ManifoldSpec::IlrSpace => Ok(()),
        }
    }

    /// Projects every row of a flat `n x k` batch.
    pub fn project_batch(&self, ys: &mut [f64], k: usize) -> Result<()> {
        if self.is_identity() {
            return Ok(());
        }
        for row in ys.chunks_exact_mut(k) {
            self.project(row)?;
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, ManifoldSpec::IlrSpace | ManifoldSpec::EuclideanPolytope { project: false, .. })
    }
}

pub fn project_box(y: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((x, l), h) in y.iter_mut().zip(lo).zip(hi) {
        *x = x.clamp(*l, *h);
    }
}

pub fn project_ball(y: &mut [f64]) {
    let norm = y.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 1.0 {
        for x in y {
            *x /= norm;
        }
    }
}

/// Euclidean projection onto `{x : A x <= b}` by Dykstra's alternating
/// half-space projections. Points violating no row by more than the
/// tolerance are returned unchanged, which makes the map idempotent.
pub fn project_halfspaces(h: &HPolytope, y: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let (a, b) = (h.a(), h.b());
    let (m, k) = (a.nrows(), a.ncols());
    if y.len() != k {
        bail!(Dimension, "point has {} coordinates, polytope {}", y.len(), k);
    }
    let norms2: Vec<f64> = (0..m).map(|i| a.row(i).norm_squared()).collect();
    let violation = |x: &[f64]| (0..m).map(|i| (0..k).map(|j| a[(i, j)] * x[j]).sum::<f64>() - b[i]).fold(0.0f64, f64::max);
    let mut x = y.to_vec();
    let scale = 1.0 + y.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    if violation(&x) <= tol * scale {
        return Ok(x);
    }
    let mut incr = vec![0.0; m * k];
    let mut z = vec![0.0; k];
    for _ in 0..max_iter {
        let mut change = 0.0f64;
        for i in 0..m {
            let p = &mut incr[i * k..(i + 1) * k];
            for j in 0..k {
                z[j] = x[j] + p[j];
            }
            let excess = (0..k).map(|j| a[(i, j)] * z[j]).sum::<f64>() - b[i];
            let shift = excess.max(0.0) / norms2[i];
            for j in 0..k {
                let nx = z[j] - shift * a[(i, j)];
                p[j] = z[j] - nx;
                change = change.max((nx - x[j]).abs());
                x[j] = nx;
            }
        }
        if change <= tol * scale && violation(&x) <= tol * scale {
            return Ok(x);
        }
    }
    Err(Error::NotConverged { iterations: max_iter, residual: violation(&x) })
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(w: &mut [f64]) {
    let mut u = w.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, ui) in u.iter().enumerate() {
        cum += ui;
        let t = (cum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    for x in w {
        *x = (*x - theta).max(0.0);
    }
}

/// Euclidean projection onto the convex hull of the vertex columns:
/// `min_lambda |V lambda - y|^2` over the simplex by accelerated projected
/// gradient, stopped on the duality gap.
pub fn project_vertices(v: &VPolytope, y: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let vm = v.vertices();
    let (k, n) = (vm.nrows(), vm.ncols());
    if y.len() != k {
        bail!(Dimension, "point has {} coordinates, polytope {}", y.len(), k);
    }
    let gram = vm.transpose() * vm;
    // power iteration for the Lipschitz constant, bounded by the trace
    let mut e = vec![1.0 / (n as f64).sqrt(); n];
    let mut lip = 0.0;
    for _ in 0..100 {
        let ge: Vec<f64> = (0..n).map(|i| (0..n).map(|j| gram[(i, j)] * e[j]).sum()).collect();
        lip = ge.iter().map(|x| x * x).sum::<f64>().sqrt();
        if lip == 0.0 {
            break;
        }
        e = ge.iter().map(|x| x / lip).collect();
    }
    let lip = (1.05 * lip).min(gram.trace()).max(1e-300);
    let vty: Vec<f64> = (0..n).map(|i| (0..k).map(|r| vm[(r, i)] * y[r]).sum()).collect();
    let grad = |lam: &[f64]| -> Vec<f64> { (0..n).map(|i| (0..n).map(|j| gram[(i, j)] * lam[j]).sum::<f64>() - vty[i]).collect() };
    let gap_of = |lam: &[f64], g: &[f64]| {
        let gmin = g.iter().cloned().fold(f64::INFINITY, f64::min);
        g.iter().zip(lam).map(|(gi, li)| gi * li).sum::<f64>() - gmin
    };
    let scale = 1.0 + y.iter().map(|x| x * x).sum::<f64>() + gram.trace();
    let mut lam = vec![1.0 / n as f64; n];
    let mut mom = lam.clone();
    let mut tk = 1.0;
    let mut gap = f64::INFINITY;
    for _ in 0..max_iter {
        let g = grad(&lam);
        gap = gap_of(&lam, &g);
        if gap <= tol * scale {
            let x = (0..k).map(|r| (0..n).map(|i| vm[(r, i)] * lam[i]).sum()).collect();
            return Ok(x);
        }
        let gm = grad(&mom);
        let mut next: Vec<f64> = mom.iter().zip(&gm).map(|(m, g)| m - g / lip).collect();
        project_simplex(&mut next);
        let tn = (1.0 + (1.0 + 4.0 * tk * tk).sqrt()) / 2.0;
        for i in 0..n {
            mom[i] = next[i] + (tk - 1.0) / tn * (next[i] - lam[i]);
        }
        lam = next;
        tk = tn;
    }
    Err(Error::NotConverged { iterations: max_iter, residual: gap })
}
