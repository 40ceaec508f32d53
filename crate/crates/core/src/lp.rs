//! Dense two-phase primal simplex for small inequality-form LPs.
//!
//! Problems are taken as `opt c·x` subject to `A x <= b` with free `x`.
//! Free variables are split into positive and negative parts and every row
//! gets a slack; rows with negative right-hand side get an artificial
//! variable for phase one. Pivoting follows Bland's rule throughout, so the
//! result is deterministic and the method cannot cycle.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::linalg::{Matrix, Vector};
use crate::polytope::HPolytope;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Optimal point; empty unless `status == Optimal`.
    pub x: Vector,
    pub objective: f64,
}

impl LpSolution {
    fn without_point(status: LpStatus, n: usize, objective: f64) -> Self {
        LpSolution { status, x: Vector::zeros(n), objective }
    }
}

pub const MAX_PIVOTS: usize = 100_000;
const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-10;

/// Optimizes `c·x` over the polytope.
pub fn solve_lp(c: &Vector, h: &HPolytope, maximize: bool) -> Result<LpSolution> {
    solve_inequality_lp(c, h.a(), h.b(), maximize)
}

/// Optimizes `c·x` subject to `a x <= b`; `x` is free.
pub fn solve_inequality_lp(c: &Vector, a: &Matrix, b: &Vector, maximize: bool) -> Result<LpSolution> {
    let (m, n) = a.shape();
    if c.len() != n || b.len() != m {
        bail!(Dimension, "LP with {m}x{n} constraints, objective of length {}, rhs of length {}", c.len(), b.len());
    }
    if c.iter().chain(b.iter()).chain(a.iter()).any(|v| !v.is_finite()) {
        bail!(InvalidInput, "LP data must be finite");
    }
    // Internally we minimize.
    let cost: Vec<f64> = c.iter().map(|&v| if maximize { -v } else { v }).collect();
    let mut tab = Tableau::build(a, b);
    tab.phase_one()?;
    if tab.objective_value() > 1e-9 * (1.0 + b.amax()) {
        return Ok(LpSolution::without_point(LpStatus::Infeasible, n, f64::NAN));
    }
    tab.expel_artificials();
    if !tab.phase_two(&cost)? {
        let obj = if maximize { f64::INFINITY } else { f64::NEG_INFINITY };
        return Ok(LpSolution::without_point(LpStatus::Unbounded, n, obj));
    }
    let x = tab.refined_point(a, b);
    let viol = (a * &x - b).iter().fold(0.0f64, |acc, &r| acc.max(r));
    if viol > 1e-7 * (1.0 + b.amax()) {
        bail!(Numerical, "simplex returned a point violating constraints by {viol:e}");
    }
    let objective = c.dot(&x);
    Ok(LpSolution { status: LpStatus::Optimal, x, objective })
}

struct Tableau {
    m: usize,
    n: usize,
    /// Columns: x+ (n), x- (n), slack (m), artificial (n_art), rhs.
    cols: usize,
    n_art: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
    /// Row of each artificial, used to map artificial column -> row.
    banned_from: usize,
}

impl Tableau {
    fn build(a: &Matrix, b: &Vector) -> Self {
        let (m, n) = a.shape();
        let n_art = b.iter().filter(|&&v| v < 0.0).count();
        let cols = 2 * n + m + n_art + 1;
        let mut data = vec![0.0; (m + 1) * cols];
        let mut basis = vec![0; m];
        let mut art = 0;
        for i in 0..m {
            let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
            let row = &mut data[i * cols..(i + 1) * cols];
            for j in 0..n {
                row[j] = sign * a[(i, j)];
                row[n + j] = -sign * a[(i, j)];
            }
            row[2 * n + i] = sign;
            row[cols - 1] = sign * b[i];
            if sign < 0.0 {
                let col = 2 * n + m + art;
                row[col] = 1.0;
                basis[i] = col;
                art += 1;
            } else {
                basis[i] = 2 * n + i;
            }
        }
        Tableau { m, n, cols, n_art, data, basis, banned_from: usize::MAX }
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    fn art_start(&self) -> usize {
        2 * self.n + self.m
    }

    fn objective_value(&self) -> f64 {
        -self.at(self.m, self.cols - 1)
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let cols = self.cols;
        let p = self.data[r * cols + c];
        for j in 0..cols {
            self.data[r * cols + j] /= p;
        }
        let (head, rest) = self.data.split_at_mut(r * cols);
        let (prow, tail) = rest.split_at_mut(cols);
        for (i, row) in head.chunks_mut(cols).chain(tail.chunks_mut(cols)).enumerate() {
            let _ = i;
            let f = row[c];
            if f != 0.0 {
                for j in 0..cols {
                    row[j] -= f * prow[j];
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Sets the objective row from costs over the first `cost.len()` columns
    /// (others cost 0) and prices out the basis.
    fn set_objective(&mut self, cost: &[f64]) {
        let cols = self.cols;
        let m = self.m;
        for j in 0..cols {
            self.data[m * cols + j] = if j < cost.len() { cost[j] } else { 0.0 };
        }
        for i in 0..m {
            let cb = self.data[m * cols + self.basis[i]];
            if cb != 0.0 {
                for j in 0..cols {
                    self.data[m * cols + j] -= cb * self.data[i * cols + j];
                }
            }
        }
    }

    /// Runs Bland-rule iterations on the current objective row. Returns
    /// `Ok(false)` when unbounded.
    fn iterate(&mut self) -> Result<bool> {
        let m = self.m;
        let limit = self.banned_from.min(self.cols - 1);
        for _ in 0..MAX_PIVOTS {
            let entering = (0..limit).find(|&j| self.at(m, j) < -COST_TOL);
            let Some(e) = entering else { return Ok(true) };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let aij = self.at(i, e);
                if aij > PIVOT_TOL {
                    let ratio = self.at(i, self.cols - 1) / aij;
                    match leave {
                        None => leave = Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-12 || (ratio <= lr + 1e-12 && self.basis[i] < self.basis[li]) {
                                leave = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            match leave {
                None => return Ok(false),
                Some((r, _)) => self.pivot(r, e),
            }
        }
        bail!(Numerical, "simplex exceeded {MAX_PIVOTS} pivots");
    }

    fn phase_one(&mut self) -> Result<()> {
        if self.n_art == 0 {
            return Ok(());
        }
        let mut cost = vec![0.0; self.cols - 1];
        for c in cost.iter_mut().skip(self.art_start()) {
            *c = 1.0;
        }
        self.set_objective(&cost);
        let bounded = self.iterate()?;
        debug_assert!(bounded, "phase one is always bounded");
        Ok(())
    }

    fn expel_artificials(&mut self) {
        let start = self.art_start();
        for i in 0..self.m {
            if self.basis[i] >= start {
                if let Some(j) = (0..start).find(|&j| self.at(i, j).abs() > PIVOT_TOL) {
                    self.pivot(i, j);
                }
            }
        }
        self.banned_from = start;
    }

    fn phase_two(&mut self, cost: &[f64]) -> Result<bool> {
        let n = self.n;
        let mut full = vec![0.0; 2 * n];
        for j in 0..n {
            full[j] = cost[j];
            full[n + j] = -cost[j];
        }
        self.set_objective(&full);
        self.iterate()
    }

    /// Recomputes the basic solution from the original data for accuracy.
    fn refined_point(&self, a: &Matrix, b: &Vector) -> Vector {
        let (m, n) = (self.m, self.n);
        let start = self.art_start();
        // Basic columns of [A, -A, I] restricted to rows whose basis is not a
        // leftover artificial.
        let rows: Vec<usize> = (0..m).filter(|&i| self.basis[i] < start).collect();
        let k = rows.len();
        let mut bmat = Matrix::zeros(m, k);
        for (c, &i) in rows.iter().enumerate() {
            let j = self.basis[i];
            for r in 0..m {
                bmat[(r, c)] = if j < n {
                    a[(r, j)]
                } else if j < 2 * n {
                    -a[(r, j - n)]
                } else if j - 2 * n == r {
                    1.0
                } else {
                    0.0
                };
            }
        }
        let tableau_x = {
            let mut x = Vector::zeros(n);
            for i in 0..m {
                let j = self.basis[i];
                let v = self.at(i, self.cols - 1);
                if j < n {
                    x[j] += v;
                } else if j < 2 * n {
                    x[j - n] -= v;
                }
            }
            x
        };
        // Least-squares solve of bmat * xb = b (consistent by construction).
        let svd = bmat.clone().svd(true, true);
        let Ok(xb) = svd.solve(b, 1e-12) else { return tableau_x };
        let mut x = Vector::zeros(n);
        for (c, &i) in rows.iter().enumerate() {
            let j = self.basis[i];
            if j < n {
                x[j] += xb[c];
            } else if j < 2 * n {
                x[j - n] -= xb[c];
            }
        }
        let err_refined = (&bmat * &xb - b).amax();
        if err_refined.is_finite() && err_refined < 1e-8 * (1.0 + b.amax()) {
            x
        } else {
            tableau_x
        }
    }
}
