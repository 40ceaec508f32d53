//! Polytope descriptions and the constraint algebra built on the LP solver.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::linalg::{Matrix, Vector};
use crate::lp::{solve_inequality_lp, LpStatus};

/// Rows with a smaller Euclidean norm are rejected as ill-posed.
pub const MIN_ROW_NORM: f64 = 1e-12;
pub const DEFAULT_TOL: f64 = 1e-9;

/// `S v = h`, `A_c v <= b_c` over named variables.
#[derive(Debug, Clone)]
pub struct CanonicalModel {
    pub s: Matrix,
    pub h: Vector,
    pub a_c: Matrix,
    pub b_c: Vector,
    pub variable_names: Vec<String>,
}

impl CanonicalModel {
    pub fn new(s: Matrix, h: Vector, a_c: Matrix, b_c: Vector, variable_names: Vec<String>) -> Result<Self> {
        let r = variable_names.len();
        if s.ncols() != r || a_c.ncols() != r {
            bail!(Dimension, "S has {} columns, A_c has {}, but {} variable names", s.ncols(), a_c.ncols(), r);
        }
        if s.nrows() != h.len() || a_c.nrows() != b_c.len() {
            bail!(Dimension, "S/h or A_c/b_c row counts differ");
        }
        if s.iter().chain(h.iter()).chain(a_c.iter()).chain(b_c.iter()).any(|v| !v.is_finite()) {
            bail!(InvalidInput, "model data and bounds must be finite");
        }
        Ok(CanonicalModel { s, h, a_c, b_c, variable_names })
    }

    /// Builds the model from per-variable `[lo, hi]` bounds, appended after
    /// any extra inequality rows.
    pub fn with_bounds(
        s: Matrix,
        h: Vector,
        extra_a: Option<(Matrix, Vector)>,
        bounds: &[(f64, f64)],
        variable_names: Vec<String>,
    ) -> Result<Self> {
        let r = variable_names.len();
        if bounds.len() != r {
            bail!(Dimension, "{} bounds for {} variables", bounds.len(), r);
        }
        let (ea, eb) = extra_a.unwrap_or_else(|| (Matrix::zeros(0, r), Vector::zeros(0)));
        if ea.ncols() != r {
            bail!(Dimension, "extra inequality matrix has {} columns, expected {r}", ea.ncols());
        }
        let rows = ea.nrows() + 2 * r;
        let mut a = Matrix::zeros(rows, r);
        let mut b = Vector::zeros(rows);
        a.view_mut((0, 0), (ea.nrows(), r)).copy_from(&ea);
        b.rows_mut(0, ea.nrows()).copy_from(&eb);
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo <= hi) {
                bail!(InvalidInput, "bound for {} has lo {lo} > hi {hi}", variable_names[i]);
            }
            let base = ea.nrows() + 2 * i;
            a[(base, i)] = -1.0;
            b[base] = -lo;
            a[(base + 1, i)] = 1.0;
            b[base + 1] = hi;
        }
        CanonicalModel::new(s, h, a, b, variable_names)
    }

    pub fn n_vars(&self) -> usize {
        self.variable_names.len()
    }
}

/// `{x : A x <= b}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HPolytope {
    a: Matrix,
    b: Vector,
}

impl HPolytope {
    /// Validates shapes, finiteness and rejects (near) zero rows.
    pub fn new(a: Matrix, b: Vector) -> Result<Self> {
        if a.nrows() != b.len() {
            bail!(Dimension, "A has {} rows but b has {} entries", a.nrows(), b.len());
        }
        if a.ncols() == 0 {
            bail!(Dimension, "polytope of dimension zero");
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            bail!(InvalidInput, "polytope data must be finite");
        }
        for (i, row) in a.row_iter().enumerate() {
            if row.norm() < MIN_ROW_NORM {
                bail!(InvalidInput, "row {i} of A is (numerically) zero");
            }
        }
        Ok(HPolytope { a, b })
    }

    /// Like [`HPolytope::new`] but additionally requires a feasible point.
    pub fn nonempty(a: Matrix, b: Vector) -> Result<Self> {
        let p = HPolytope::new(a, b)?;
        if !p.is_feasible()? {
            bail!(Infeasible, "polytope is empty");
        }
        Ok(p)
    }

    /// Axis-aligned box `lo <= x <= hi`.
    pub fn from_box(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != hi.len() {
            bail!(Dimension, "box bounds of different lengths");
        }
        let k = lo.len();
        let mut a = Matrix::zeros(2 * k, k);
        let mut b = Vector::zeros(2 * k);
        for i in 0..k {
            a[(2 * i, i)] = 1.0;
            b[2 * i] = hi[i];
            a[(2 * i + 1, i)] = -1.0;
            b[2 * i + 1] = -lo[i];
        }
        HPolytope::new(a, b)
    }

    /// `[-1, 1]^k`.
    pub fn cube(k: usize) -> Self {
        let lo = alloc::vec![-1.0; k];
        let hi = alloc::vec![1.0; k];
        HPolytope::from_box(&lo, &hi).expect("cube is valid")
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Vector {
        &self.b
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn n_rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn into_parts(self) -> (Matrix, Vector) {
        (self.a, self.b)
    }

    pub fn row_norms(&self) -> Vector {
        Vector::from_iterator(self.n_rows(), self.a.row_iter().map(|r| r.norm()))
    }

    /// `b - A x`.
    pub fn slack(&self, x: &Vector) -> Vector {
        &self.b - &self.a * x
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        self.slack(x).iter().all(|&s| s >= -tol)
    }

    pub fn strictly_contains(&self, x: &Vector) -> bool {
        self.slack(x).iter().all(|&s| s > 0.0)
    }

    pub fn is_feasible(&self) -> Result<bool> {
        let c = Vector::zeros(self.dim());
        let sol = solve_inequality_lp(&c, &self.a, &self.b, true)?;
        Ok(sol.status == LpStatus::Optimal)
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let a = self.a.select_rows(rows.iter());
        let b = Vector::from_iterator(rows.len(), rows.iter().map(|&i| self.b[i]));
        HPolytope::new(a, b)
    }

    /// `max a_i·x` over the rows listed in `active`, with row `i` relaxed
    /// by `relax` so that the LP stays bounded.
    fn row_extreme(&self, i: usize, active: &[usize], maximize: bool, relax: Option<f64>) -> Result<(LpStatus, f64)> {
        let a = self.a.select_rows(active.iter());
        let mut b = Vector::from_iterator(active.len(), active.iter().map(|&r| self.b[r]));
        if let Some(delta) = relax {
            for (k, &r) in active.iter().enumerate() {
                if r == i {
                    b[k] += delta;
                }
            }
        }
        let c = self.a.row(i).transpose();
        let sol = solve_inequality_lp(&c, &a, &b, maximize)?;
        Ok((sol.status, sol.objective))
    }
}

/// Columns of `vertices` are the vertices of the polytope.
#[derive(Debug, Clone, PartialEq)]
pub struct VPolytope {
    vertices: Matrix,
}

impl VPolytope {
    pub fn new(vertices: Matrix) -> Result<Self> {
        if vertices.ncols() == 0 || vertices.nrows() == 0 {
            bail!(Dimension, "empty vertex matrix");
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            bail!(InvalidInput, "vertices must be finite");
        }
        Ok(VPolytope { vertices })
    }

    pub fn vertices(&self) -> &Matrix {
        &self.vertices
    }

    pub fn dim(&self) -> usize {
        self.vertices.nrows()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.ncols()
    }

    pub fn centroid(&self) -> Vector {
        self.vertices.column_mean()
    }
}

/// Stacks `[S; -S; A_c]` and `[h; -h; b_c]`.
pub fn canonicalize(model: &CanonicalModel) -> Result<HPolytope> {
    let r = model.n_vars();
    let (m, c) = (model.s.nrows(), model.a_c.nrows());
    if model.s.ncols() != r || model.a_c.ncols() != r {
        bail!(Dimension, "inconsistent model column counts");
    }
    let mut a = Matrix::zeros(2 * m + c, r);
    let mut b = Vector::zeros(2 * m + c);
    a.view_mut((0, 0), (m, r)).copy_from(&model.s);
    a.view_mut((m, 0), (m, r)).copy_from(&(-&model.s));
    a.view_mut((2 * m, 0), (c, r)).copy_from(&model.a_c);
    b.rows_mut(0, m).copy_from(&model.h);
    b.rows_mut(m, m).copy_from(&(-&model.h));
    b.rows_mut(2 * m, c).copy_from(&model.b_c);
    HPolytope::new(a, b)
}

/// Drops every row that is implied by the remaining ones.
///
/// Rows are visited in order; row `i` is removed when maximizing `a_i·x`
/// over the current constraint set (with row `i` relaxed by one unit)
/// cannot exceed `b_i + tol·(1 + |b_i|)`.
pub fn remove_redundant(h: &HPolytope, tol: f64) -> Result<HPolytope> {
    let mut kept: Vec<usize> = (0..h.n_rows()).collect();
    let mut i = 0;
    while i < kept.len() {
        let row = kept[i];
        let (status, value) = h.row_extreme(row, &kept, true, Some(1.0))?;
        match status {
            LpStatus::Optimal if value <= h.b[row] + tol * (1.0 + h.b[row].abs()) => {
                kept.remove(i);
            }
            LpStatus::Infeasible => bail!(Infeasible, "polytope is empty"),
            _ => i += 1,
        }
    }
    h.select_rows(&kept)
}

/// Result of splitting a polytope into its affine hull and the residual
/// inequalities.
#[derive(Debug, Clone)]
pub struct ImplicitEqualities {
    pub s_plus: Matrix,
    pub h_plus: Vector,
    pub residual: HPolytope,
    /// Indices (into the input) of the rows moved into `s_plus`.
    pub equality_rows: Vec<usize>,
}

/// Moves every row whose range `[min a_i·x, max a_i·x]` over the polytope
/// is narrower than `tol` into the equality system.
pub fn find_implicit_equalities(h: &HPolytope, tol: f64) -> Result<ImplicitEqualities> {
    let all: Vec<usize> = (0..h.n_rows()).collect();
    let mut eq = Vec::new();
    let mut rest = Vec::new();
    for &i in &all {
        // A row that is constant over the polytope but never tight (e.g. an
        // upper bound on a variable pinned below it) is not an equality.
        let (smin, vmin) = h.row_extreme(i, &all, false, None)?;
        if smin == LpStatus::Infeasible {
            bail!(Infeasible, "polytope is empty");
        }
        let bi = h.b[i];
        if smin == LpStatus::Optimal && bi - vmin < tol * (1.0 + bi.abs()) {
            eq.push(i);
        } else {
            rest.push(i);
        }
    }
    let s_plus = h.a.select_rows(eq.iter());
    let h_plus = Vector::from_iterator(eq.len(), eq.iter().map(|&i| h.b[i]));
    let residual_a = h.a.select_rows(rest.iter());
    let residual_b = Vector::from_iterator(rest.len(), rest.iter().map(|&i| h.b[i]));
    if rest.is_empty() {
        bail!(InvalidInput, "every constraint is an equality; the polytope is a single point");
    }
    Ok(ImplicitEqualities {
        s_plus,
        h_plus,
        residual: HPolytope::new(residual_a, residual_b)?,
        equality_rows: eq,
    })
}

/// Brute-force vertex enumeration for small full-dimensional polytopes:
/// every `dim`-subset of rows is solved and kept when feasible.
///
/// The number of subsets grows combinatorially, so this is only meant for
/// low dimensions and few facets (it errors past `max_subsets`).
pub fn enumerate_vertices(h: &HPolytope, tol: f64, max_subsets: usize) -> Result<VPolytope> {
    let (m, k) = (h.n_rows(), h.dim());
    if binomial(m, k) > max_subsets as f64 {
        bail!(InvalidInput, "{m} choose {k} row subsets exceeds the enumeration limit {max_subsets}");
    }
    let scale = 1.0 + h.b.amax();
    let mut verts: Vec<Vector> = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let sub = h.a.select_rows(idx.iter());
        let rhs = Vector::from_iterator(k, idx.iter().map(|&i| h.b[i]));
        let lu = sub.lu();
        if let Some(x) = lu.solve(&rhs) {
            let well_posed = (&h.a.select_rows(idx.iter()) * &x - &rhs).amax() < 1e-9 * scale;
            if well_posed && h.contains(&x, tol * scale) && !verts.iter().any(|v| (v - &x).amax() < 1e-7 * scale) {
                verts.push(x);
            }
        }
        // next combination
        let mut p = k;
        loop {
            if p == 0 {
                let mut mat = Matrix::zeros(k, verts.len());
                for (j, v) in verts.iter().enumerate() {
                    mat.set_column(j, v);
                }
                if verts.is_empty() {
                    bail!(Infeasible, "no vertices found");
                }
                return VPolytope::new(mat);
            }
            p -= 1;
            if idx[p] < m - k + p {
                idx[p] += 1;
                for q in p + 1..k {
                    idx[q] = idx[q - 1] + 1;
                }
                break;
            }
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Human-readable one-line summary.
pub fn describe(h: &HPolytope) -> String {
    format!("H-polytope with {} rows in dimension {}", h.n_rows(), h.dim())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn canonicalize_small_model() {
        let s = Matrix::from_row_slice(1, 2, &[1.0, -1.0]);
        let model = CanonicalModel::with_bounds(s, Vector::zeros(1), None, &[(0.0, 1.0), (0.0, 1.0)], names(2)).unwrap();
        let h = canonicalize(&model).unwrap();
        assert_eq!(h.n_rows(), 6);
        assert_eq!(h.a().row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, -1.0]);
        assert_eq!(h.a().row(1).iter().copied().collect::<Vec<_>>(), vec![-1.0, 1.0]);
        // the feasible point (0.5, 0.5) satisfies the stacked system exactly
        assert!(h.contains(&Vector::from_vec(vec![0.5, 0.5]), 0.0));
    }

    #[test]
    fn canonicalize_without_inequalities() {
        let s = Matrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let model = CanonicalModel::new(s.clone(), Vector::from_vec(vec![3.0]), Matrix::zeros(0, 2), Vector::zeros(0), names(2)).unwrap();
        let h = canonicalize(&model).unwrap();
        assert_eq!(h.n_rows(), 2);
        assert_eq!(h.b()[1], -3.0);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let s = Matrix::zeros(1, 3);
        assert!(CanonicalModel::new(s, Vector::zeros(1), Matrix::zeros(0, 3), Vector::zeros(0), names(2)).is_err());
    }

    #[test]
    fn zero_rows_rejected() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-13]);
        assert!(HPolytope::new(a, Vector::from_vec(vec![1.0, 1.0])).is_err());
    }

    #[test]
    fn duplicate_constraint_removed_once() {
        let mut a = HPolytope::cube(2).a().clone().insert_row(4, 0.0);
        a[(4, 0)] = 1.0;
        let mut b = HPolytope::cube(2).b().clone().insert_row(4, 0.0);
        b[4] = 1.0;
        let h = HPolytope::new(a, b).unwrap();
        let r = remove_redundant(&h, DEFAULT_TOL).unwrap();
        assert_eq!(r.n_rows(), 4);
        let copies = r.a().row_iter().filter(|row| row[0] == 1.0 && row[1] == 0.0).count();
        assert_eq!(copies, 1);
    }

    #[test]
    fn loose_constraint_removed() {
        let mut a = HPolytope::cube(2).a().clone().insert_row(4, 0.0);
        a[(4, 0)] = 1.0;
        let mut b = HPolytope::cube(2).b().clone().insert_row(4, 0.0);
        b[4] = 2.0;
        let r = remove_redundant(&HPolytope::new(a, b).unwrap(), DEFAULT_TOL).unwrap();
        assert_eq!(r.n_rows(), 4);
        assert!(r.b().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn implicit_equality_detected() {
        // x <= 1, -x <= -1, -1 <= y <= 1
        let a = Matrix::from_row_slice(4, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]);
        let b = Vector::from_vec(vec![1.0, -1.0, 1.0, 1.0]);
        let eq = find_implicit_equalities(&HPolytope::new(a, b).unwrap(), DEFAULT_TOL).unwrap();
        assert_eq!(eq.equality_rows, vec![0, 1]);
        assert_eq!(eq.residual.n_rows(), 2);
    }

    #[test]
    fn cube_has_no_implicit_equalities() {
        let eq = find_implicit_equalities(&HPolytope::cube(3), DEFAULT_TOL).unwrap();
        assert!(eq.equality_rows.is_empty());
        assert_eq!(eq.residual.n_rows(), 6);
    }

    #[test]
    fn cube_vertices() {
        let v = enumerate_vertices(&HPolytope::cube(3), 1e-9, 10_000).unwrap();
        assert_eq!(v.n_vertices(), 8);
        assert!(v.centroid().amax() < 1e-12);
    }
}
