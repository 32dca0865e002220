//! Compressed-row sparse matrices and the preconditioned conjugate gradient solver.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("conjugate gradients did not converge in {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("load is not orthogonal to the null space (relative component {component:e})")]
    IncompatibleLoad { component: f64 },
    #[error("dimension mismatch: matrix {matrix}, vector {vector}")]
    DimensionMismatch { matrix: usize, vector: usize },
    #[error("breakdown: search direction has non-positive energy {0:e}")]
    Breakdown(f64),
}

/// Square sparse matrix in compressed row storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from (row, col, value) triplets; duplicates are summed and
    /// explicit zeros kept, so equal triplet patterns give equal structures.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&k| (triplets[k].0, triplets[k].1));
        let mut row_ptr = vec![0; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len() / 2);
        let mut vals = Vec::with_capacity(triplets.len() / 2);
        let mut last: Option<(usize, usize)> = None;
        for k in order {
            let (i, j, v) = triplets[k];
            assert!(i < dim && j < dim, "triplet ({i}, {j}) outside {dim}x{dim}");
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(j);
                vals.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            dim,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.vals
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.vals[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[range.clone()].binary_search(&j) {
            Ok(k) => self.vals[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn same_pattern(&self, other: &SparseMatrix) -> bool {
        self.dim == other.dim && self.row_ptr == other.row_ptr && self.cols == other.cols
    }

    /// `alpha·self + beta·other` for matrices sharing one pattern.
    pub fn combine(&self, alpha: f64, other: &SparseMatrix, beta: f64) -> SparseMatrix {
        assert!(self.same_pattern(other), "patterns differ");
        SparseMatrix {
            dim: self.dim,
            row_ptr: self.row_ptr.clone(),
            cols: self.cols.clone(),
            vals: self
                .vals
                .iter()
                .zip(&other.vals)
                .map(|(a, b)| alpha * a + beta * b)
                .collect(),
        }
    }

    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            *yi = s;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.mul_into(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    /// Row sums (used for mass lumping).
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul(x))
    }

    pub fn diagonal_matrix(diag: &[f64]) -> SparseMatrix {
        let triplets: Vec<_> = diag.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        SparseMatrix::from_triplets(diag.len(), &triplets)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Symmetric elimination of prescribed unknowns.
#[derive(Debug, Clone)]
pub struct Reduction {
    dim: usize,
    /// global index → reduced index for free unknowns
    local: Vec<Option<usize>>,
    free: Vec<usize>,
    fixed: Vec<usize>,
}

impl Reduction {
    pub fn new(dim: usize, fixed: impl IntoIterator<Item = usize>) -> Self {
        let mut is_fixed = vec![false; dim];
        for f in fixed {
            is_fixed[f] = true;
        }
        let mut local = vec![None; dim];
        let mut free = Vec::new();
        let mut fixed = Vec::new();
        for i in 0..dim {
            if is_fixed[i] {
                fixed.push(i);
            } else {
                local[i] = Some(free.len());
                free.push(i);
            }
        }
        Self {
            dim,
            local,
            free,
            fixed,
        }
    }

    pub fn free(&self) -> &[usize] {
        &self.free
    }

    pub fn fixed(&self) -> &[usize] {
        &self.fixed
    }

    pub fn free_count(&self) -> usize {
        self.free.len()
    }

    pub fn is_fixed(&self, i: usize) -> bool {
        self.local[i].is_none()
    }

    /// Free-free block of `matrix`.
    pub fn matrix(&self, matrix: &SparseMatrix) -> SparseMatrix {
        assert_eq!(matrix.dim(), self.dim);
        let mut triplets = Vec::with_capacity(matrix.nnz());
        for (li, &gi) in self.free.iter().enumerate() {
            for (gj, v) in matrix.row(gi) {
                if let Some(lj) = self.local[gj] {
                    triplets.push((li, lj, v));
                }
            }
        }
        SparseMatrix::from_triplets(self.free.len(), &triplets)
    }

    /// Reduced right-hand side `f_free − K_free,fixed · g`, with `g` read from
    /// `values` at the fixed indices.
    pub fn rhs(&self, matrix: &SparseMatrix, load: &[f64], values: &[f64]) -> Vec<f64> {
        self.free
            .iter()
            .map(|&gi| {
                let coupling: f64 = matrix
                    .row(gi)
                    .filter(|(gj, _)| self.local[*gj].is_none())
                    .map(|(gj, v)| v * values[gj])
                    .sum();
                load[gi] - coupling
            })
            .collect()
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&g| full[g]).collect()
    }

    /// Full vector with free entries from `reduced` and fixed entries from `values`.
    pub fn expand(&self, reduced: &[f64], values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &g in &self.fixed {
            out[g] = values[g];
        }
        for (l, &g) in self.free.iter().enumerate() {
            out[g] = reduced[l];
        }
        out
    }
}

/// Orthonormal basis of a null space to be projected out of every iterate.
#[derive(Debug, Clone)]
pub struct NullSpace {
    basis: Vec<Vec<f64>>,
}

impl NullSpace {
    /// Orthonormalises `vectors` (modified Gram–Schmidt, dependent vectors dropped).
    pub fn new(vectors: Vec<Vec<f64>>) -> Self {
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for mut v in vectors {
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(q, &v);
                    v.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
                }
            }
            let n = norm(&v);
            if n > 1e-12 {
                v.iter_mut().for_each(|x| *x /= n);
                basis.push(v);
            }
        }
        Self { basis }
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn project(&self, v: &mut [f64]) {
        for q in &self.basis {
            let c = dot(q, v);
            v.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
        }
    }

    /// Largest |⟨q, v⟩| over the basis, relative to ‖v‖.
    pub fn relative_component(&self, v: &[f64]) -> f64 {
        let n = norm(v);
        if n == 0.0 {
            return 0.0;
        }
        self.basis
            .iter()
            .map(|q| dot(q, v).abs())
            .fold(0.0, f64::max)
            / n
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final residual norm relative to the right-hand side norm.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct CgOptions {
    pub tol: f64,
    pub max_iter: usize,
}

/// Jacobi-preconditioned conjugate gradients.
///
/// With a `null_space`, the right-hand side must be orthogonal to it (to
/// `tol`), every residual and preconditioned residual is re-orthogonalised,
/// and the returned solution is the representative orthogonal to the null
/// space. Convergence is `‖r‖ ≤ tol·‖rhs‖`.
pub fn solve_cg(
    matrix: &SparseMatrix,
    rhs: &[f64],
    guess: Option<&[f64]>,
    null_space: Option<&NullSpace>,
    options: CgOptions,
) -> Result<CgOutcome, SolveError> {
    let n = matrix.dim();
    if rhs.len() != n {
        return Err(SolveError::DimensionMismatch {
            matrix: n,
            vector: rhs.len(),
        });
    }
    let mut b = rhs.to_vec();
    if let Some(ns) = null_space {
        let component = ns.relative_component(&b);
        if component > options.tol.max(1e-12) {
            return Err(SolveError::IncompatibleLoad { component });
        }
        ns.project(&mut b);
    }
    let b_norm = norm(&b);
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
        });
    }

    let inv_diag: Vec<f64> = matrix
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let precondition = |r: &[f64], z: &mut [f64]| {
        for i in 0..n {
            z[i] = inv_diag[i] * r[i];
        }
        if let Some(ns) = null_space {
            ns.project(z);
        }
    };

    let mut x = match guess {
        Some(g) if g.len() == n => g.to_vec(),
        _ => vec![0.0; n],
    };
    if let Some(ns) = null_space {
        ns.project(&mut x);
    }
    let mut r = matrix.mul(&x);
    r.iter_mut().zip(&b).for_each(|(ri, bi)| *ri = bi - *ri);
    if let Some(ns) = null_space {
        ns.project(&mut r);
    }
    let mut residual = norm(&r) / b_norm;
    if residual <= options.tol {
        return Ok(CgOutcome {
            x,
            iterations: 0,
            residual,
        });
    }

    let mut z = vec![0.0; n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for iteration in 1..=options.max_iter {
        matrix.mul_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(SolveError::Breakdown(pap));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if let Some(ns) = null_space {
            ns.project(&mut r);
            ns.project(&mut x);
        }
        residual = norm(&r) / b_norm;
        if residual <= options.tol {
            return Ok(CgOutcome {
                x,
                iterations: iteration,
                residual,
            });
        }
        precondition(&r, &mut z);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(SolveError::NotConverged {
        iterations: options.max_iter,
        residual,
    })
}

/// Prescribed values keyed by global unknown index.
pub type Constraints = BTreeMap<usize, f64>;

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        SparseMatrix::from_triplets(n, &t)
    }

    #[test]
    fn triplets_merge_duplicates() {
        let m = SparseMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, 0.0), (0, 1, 4.0)]);
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.get(0, 1), 4.0);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(1, 1), 0.0);
    }

    #[test]
    fn cg_solves_spd_system() {
        let m = laplacian_1d(50);
        let exact: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = m.mul(&exact);
        let out = solve_cg(
            &m,
            &b,
            None,
            None,
            CgOptions {
                tol: 1e-12,
                max_iter: 200,
            },
        )
        .unwrap();
        let err = out
            .x
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
        assert!(out.residual <= 1e-12);
    }

    #[test]
    fn cg_reports_non_convergence() {
        let m = laplacian_1d(200);
        let b = vec![1.0; 200];
        let err = solve_cg(
            &m,
            &b,
            None,
            None,
            CgOptions {
                tol: 1e-12,
                max_iter: 3,
            },
        )
        .unwrap_err();
        assert!(matches!(err, SolveError::NotConverged { iterations: 3, .. }));
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let m = laplacian_1d(5);
        let out = solve_cg(&m, &[0.0; 5], None, None, CgOptions { tol: 1e-9, max_iter: 10 }).unwrap();
        assert_eq!(out.x, vec![0.0; 5]);
    }

    #[test]
    fn projected_cg_on_singular_neumann_operator() {
        // 1D Neumann Laplacian: kernel = constants
        let n = 40;
        let mut t = Vec::new();
        for i in 0..n - 1 {
            t.extend([(i, i, 1.0), (i + 1, i + 1, 1.0), (i, i + 1, -1.0), (i + 1, i, -1.0)]);
        }
        let m = SparseMatrix::from_triplets(n, &t);
        let ns = NullSpace::new(vec![vec![1.0; n]]);
        let mut b: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        ns.project(&mut b);
        let out = solve_cg(&m, &b, None, Some(&ns), CgOptions { tol: 1e-12, max_iter: 500 }).unwrap();
        assert!(ns.relative_component(&out.x) < 1e-12);
        let r: Vec<f64> = m.mul(&out.x).iter().zip(&b).map(|(a, b)| a - b).collect();
        assert!(norm(&r) < 1e-10);

        let bad = vec![1.0; n];
        assert!(matches!(
            solve_cg(&m, &bad, None, Some(&ns), CgOptions { tol: 1e-9, max_iter: 10 }),
            Err(SolveError::IncompatibleLoad { .. })
        ));
    }

    #[test]
    fn reduction_round_trip() {
        let m = laplacian_1d(6);
        let red = Reduction::new(6, [0, 5]);
        let kff = red.matrix(&m);
        assert_eq!(kff.dim(), 4);
        assert_eq!(kff.max_asymmetry(), 0.0);
        let mut values = vec![0.0; 6];
        values[0] = 1.0;
        values[5] = 2.0;
        let rhs = red.rhs(&m, &[0.0; 6], &values);
        let out = solve_cg(&kff, &rhs, None, None, CgOptions { tol: 1e-14, max_iter: 50 }).unwrap();
        let full = red.expand(&out.x, &values);
        // discrete harmonic: linear interpolation between the ends
        for (i, v) in full.iter().enumerate() {
            assert!((v - (1.0 + i as f64 / 5.0)).abs() < 1e-12);
        }
    }
}
