//! Sparse matrix storage and the direct solvers used throughout the crate.
//!
//! [`CsrMatrix`] is the crate's own compressed-row container; it is what the
//! assembly, the shape matrix and the multiscale basis are stored in.
//! Factorizations of symmetric positive definite matrices are delegated to
//! `faer`'s supernodal sparse Cholesky behind [`SparseCholesky`]. Small dense
//! systems with possibly redundant rows go through [`PivotedCholesky`].

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{MatMut, Side};

use crate::{Error, Result};

/// Compressed sparse row matrix of `f64`.
///
/// Column indices within a row are strictly increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    ///
    /// Duplicates are summed in input order so the result is a deterministic
    /// function of the triplet sequence.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        // bucket by row, keeping input order inside each row
        let mut next = counts.clone();
        let mut bucket = vec![(0usize, 0.0f64); triplets.len()];
        for &(r, c, v) in triplets {
            bucket[next[r]] = (c, v);
            next[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        for r in 0..nrows {
            let row = &mut bucket[counts[r]..counts[r + 1]];
            row.sort_by_key(|&(c, _)| c);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut sum = 0.0;
                while k < row.len() && row[k].0 == c {
                    sum += row[k].1;
                    k += 1;
                }
                col_idx.push(c);
                values.push(sum);
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Builds a matrix from rows given as sorted `(col, value)` lists.
    pub fn from_sorted_rows(ncols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let nrows = rows.len();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                debug_assert!(c < ncols);
                debug_assert!(col_idx.len() == *row_ptr.last().unwrap() || *col_idx.last().unwrap() < c);
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[range.clone()], &self.values[range])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// Iterates over stored entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| {
                let (cols, vals) = self.row(r);
                cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum()
            })
            .collect()
    }

    /// `y = Aᵀ x`.
    pub fn transpose_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (r, &xr) in x.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                y[c] += v * xr;
            }
        }
        y
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for i in 0..self.ncols {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                col_idx[next[c]] = r;
                values[next[c]] = v;
                next[c] += 1;
            }
        }
        CsrMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr: counts,
            col_idx,
            values,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A_rc − A_cr|` over all entries of a square matrix.
    pub fn max_asymmetry(&self) -> f64 {
        assert_eq!(self.nrows, self.ncols);
        let t = self.transpose();
        self.sub(&t).max_abs()
    }

    /// Entrywise `A − B` on the union of both patterns.
    pub fn sub(&self, other: &CsrMatrix) -> CsrMatrix {
        self.combine(other, 1.0, -1.0)
    }

    /// `alpha·A + beta·B` on the union of both patterns.
    pub fn combine(&self, other: &CsrMatrix, alpha: f64, beta: f64) -> CsrMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut rows = Vec::with_capacity(self.nrows);
        for r in 0..self.nrows {
            let (ca, va) = self.row(r);
            let (cb, vb) = other.row(r);
            let (mut i, mut j) = (0, 0);
            let mut row = Vec::with_capacity(ca.len().max(cb.len()));
            while i < ca.len() || j < cb.len() {
                if j == cb.len() || (i < ca.len() && ca[i] < cb[j]) {
                    row.push((ca[i], alpha * va[i]));
                    i += 1;
                } else if i == ca.len() || cb[j] < ca[i] {
                    row.push((cb[j], beta * vb[j]));
                    j += 1;
                } else {
                    row.push((ca[i], alpha * va[i] + beta * vb[j]));
                    i += 1;
                    j += 1;
                }
            }
            rows.push(row);
        }
        CsrMatrix::from_sorted_rows(self.ncols, rows)
    }

    /// `(A + Aᵀ) / 2`.
    pub fn symmetric_part(&self) -> CsrMatrix {
        self.combine(&self.transpose(), 0.5, 0.5)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// Extracts `A[rows, cols]`; `rows` and `cols` must be strictly increasing.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> CsrMatrix {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            col_map[c] = k;
        }
        let sub_rows = rows
            .iter()
            .map(|&r| {
                let (cs, vs) = self.row(r);
                cs.iter()
                    .zip(vs)
                    .filter_map(|(&c, &v)| (col_map[c] != usize::MAX).then(|| (col_map[c], v)))
                    .collect()
            })
            .collect();
        CsrMatrix::from_sorted_rows(cols.len(), sub_rows)
    }

    /// Dense row-major copy. Intended for small matrices and tests.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, c, v) in self.iter() {
            dense[r][c] = v;
        }
        dense
    }
}

/// Sparse Cholesky factorization `A = L Lᵀ` of a symmetric positive definite
/// matrix, with a fill-reducing ordering chosen by `faer`.
pub struct SparseCholesky {
    dim: usize,
    llt: Llt<usize, f64>,
}

impl std::fmt::Debug for SparseCholesky {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseCholesky").field("dim", &self.dim).finish()
    }
}

impl SparseCholesky {
    /// Factors a symmetric matrix. Only the lower triangle is read.
    pub fn factor(matrix: &CsrMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::Numerical(format!(
                "cannot factor a {}x{} matrix",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let n = matrix.nrows();
        if n == 0 {
            return Err(Error::Numerical("cannot factor an empty matrix".into()));
        }
        // for a symmetric matrix the CSR arrays are also its CSC arrays
        let symbolic = SymbolicSparseColMatRef::new_checked(n, n, &matrix.row_ptr, None, &matrix.col_idx);
        let mat = SparseColMatRef::new(symbolic, &matrix.values);
        let sym = SymbolicLlt::try_new(symbolic, Side::Lower)
            .map_err(|e| Error::Numerical(format!("symbolic Cholesky failed: {e:?}")))?;
        let llt = Llt::try_new_with_symbolic(sym, mat, Side::Lower)
            .map_err(|e| Error::Numerical(format!("matrix is not positive definite ({e})")))?;
        Ok(Self { dim: n, llt })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        self.solve_columns(rhs, 1);
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Solves for `ncols` right-hand sides stored column-major in `data`.
    pub fn solve_columns(&self, data: &mut [f64], ncols: usize) {
        assert_eq!(data.len(), self.dim * ncols);
        if ncols == 0 {
            return;
        }
        let rhs = MatMut::from_column_major_slice_mut(data, self.dim, ncols);
        self.llt.solve_in_place(rhs);
    }
}

/// Dense Cholesky with diagonal pivoting for symmetric positive semidefinite
/// matrices. Pivots below `tol · max diag` terminate the factorization, which
/// leaves a full-rank leading block; consistent singular systems are then
/// solved exactly with the remaining unknowns set to zero.
#[derive(Clone, Debug)]
pub struct PivotedCholesky {
    n: usize,
    rank: usize,
    perm: Vec<usize>,
    // column-major n x rank, rows in permuted order
    factor: Vec<f64>,
}

impl PivotedCholesky {
    /// `matrix` is dense row-major `n x n`; only its lower triangle is read.
    pub fn factor(matrix: &[f64], n: usize, tol: f64) -> Self {
        assert_eq!(matrix.len(), n * n);
        // working copy of the lower triangle, column-major: a[j * n + i], i >= j
        let mut a = vec![0.0; n * n];
        for j in 0..n {
            for i in j..n {
                a[j * n + i] = matrix[i * n + j];
            }
        }
        let mut perm: Vec<usize> = (0..n).collect();
        let mut diag: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
        let max_diag = diag.iter().copied().fold(0.0f64, f64::max);
        let threshold = tol * max_diag;
        let mut rank = 0;
        for k in 0..n {
            // largest remaining updated diagonal, ties to the lower index
            let (p, d) = (k..n)
                .map(|i| (i, diag[i]))
                .max_by(|x, y| x.1.total_cmp(&y.1).then(y.0.cmp(&x.0)))
                .unwrap();
            if !(d > threshold) || d <= 0.0 {
                break;
            }
            if p != k {
                swap_lower(&mut a, n, k, p);
                perm.swap(k, p);
                diag.swap(k, p);
            }
            // column k of the original matrix minus contributions of earlier columns
            let (done, rest) = a.split_at_mut(k * n);
            let col = &mut rest[..n];
            for j in 0..k {
                let lj = &done[j * n..(j + 1) * n];
                let ljk = lj[k];
                if ljk != 0.0 {
                    for i in k + 1..n {
                        col[i] -= lj[i] * ljk;
                    }
                }
            }
            let pivot = d.sqrt();
            col[k] = pivot;
            for i in k + 1..n {
                col[i] /= pivot;
                diag[i] -= col[i] * col[i];
            }
            rank += 1;
        }
        let mut factor = vec![0.0; n * rank];
        for k in 0..rank {
            factor[k * n + k..(k + 1) * n].copy_from_slice(&a[k * n + k..(k + 1) * n]);
        }
        Self { n, rank, perm, factor }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Solves `A x = b` using the leading full-rank block.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, r) = (self.n, self.rank);
        let mut y: Vec<f64> = (0..r).map(|k| b[self.perm[k]]).collect();
        for k in 0..r {
            y[k] /= self.factor[k * n + k];
            let yk = y[k];
            for i in k + 1..r {
                y[i] -= self.factor[k * n + i] * yk;
            }
        }
        for k in (0..r).rev() {
            let mut s = y[k];
            for i in k + 1..r {
                s -= self.factor[k * n + i] * y[i];
            }
            y[k] = s / self.factor[k * n + k];
        }
        let mut x = vec![0.0; n];
        for k in 0..r {
            x[self.perm[k]] = y[k];
        }
        x
    }
}

/// Symmetric swap of rows and columns `p < q` in a column-major lower triangle.
/// Columns before `p` are already factored and only need their rows swapped.
fn swap_lower(a: &mut [f64], n: usize, p: usize, q: usize) {
    let at = |i: usize, j: usize| if i >= j { j * n + i } else { i * n + j };
    for j in 0..n {
        if j == p || j == q {
            continue;
        }
        let (x, y) = (at(p, j), at(q, j));
        a.swap(x, y);
    }
    a.swap(p * n + p, q * n + q);
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn triplets_sum_duplicates() {
        let m = CsrMatrix::from_triplets(2, 3, &[(0, 2, 1.0), (0, 2, 2.5), (1, 0, -1.0), (0, 0, 4.0)]);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(0, 2), 3.5);
        assert_eq!(m.get(0, 0), 4.0);
        assert_eq!(m.get(1, 0), -1.0);
        assert_eq!(m.get(1, 1), 0.0);
    }

    #[test]
    fn transpose_and_symmetric_part() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 1, 2.0), (1, 0, 4.0), (1, 1, 1.0)]);
        assert_eq!(m.transpose().get(0, 1), 4.0);
        assert_eq!(m.max_asymmetry(), 2.0);
        let s = m.symmetric_part();
        assert_eq!(s.get(0, 1), 3.0);
        assert_eq!(s.max_asymmetry(), 0.0);
    }

    #[test]
    fn submatrix_keeps_selected_entries() {
        let m = laplacian_1d(5);
        let s = m.submatrix(&[1, 2, 4], &[1, 2, 4]);
        assert_eq!(s.to_dense(), vec![vec![2.0, -1.0, 0.0], vec![-1.0, 2.0, 0.0], vec![0.0, 0.0, 2.0]]);
    }

    #[test]
    fn sparse_cholesky_solves_laplacian() {
        let n = 50;
        let m = laplacian_1d(n);
        let chol = SparseCholesky::factor(&m).unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = chol.solve(&b);
        let r: Vec<f64> = m.mul_vec(&x).iter().zip(&b).map(|(a, b)| a - b).collect();
        assert!(norm2(&r) <= 1e-12 * norm2(&b));
    }

    #[test]
    fn sparse_cholesky_rejects_indefinite() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, -1.0)]);
        assert!(SparseCholesky::factor(&m).is_err());
    }

    #[test]
    fn pivoted_cholesky_handles_rank_deficiency() {
        // A = v vᵀ + w wᵀ in 3-d, rank 2
        let v = [1.0, 2.0, 3.0];
        let w = [0.0, 1.0, -1.0];
        let mut a = vec![0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                a[i * 3 + j] = v[i] * v[j] + w[i] * w[j];
            }
        }
        let pc = PivotedCholesky::factor(&a, 3, 1e-12);
        assert_eq!(pc.rank(), 2);
        // consistent right-hand side in the range of A
        let x_true = [0.3, -0.2, 0.7];
        let b: Vec<f64> = (0..3).map(|i| (0..3).map(|j| a[i * 3 + j] * x_true[j]).sum()).collect();
        let x = pc.solve(&b);
        let ax: Vec<f64> = (0..3).map(|i| (0..3).map(|j| a[i * 3 + j] * x[j]).sum()).collect();
        for i in 0..3 {
            assert!((ax[i] - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn pivoted_cholesky_larger_rank_deficient() {
        // A = B Bᵀ with B 30 x 20 from a simple deterministic sequence
        let (n, r) = (30, 20);
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let b: Vec<f64> = (0..n * r).map(|_| next()).collect();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = (0..r).map(|k| b[i * r + k] * b[j * r + k]).sum();
            }
        }
        let pc = PivotedCholesky::factor(&a, n, 1e-12);
        assert_eq!(pc.rank(), r);
        let x_true: Vec<f64> = (0..n).map(|_| next()).collect();
        let rhs: Vec<f64> = (0..n).map(|i| (0..n).map(|j| a[i * n + j] * x_true[j]).sum()).collect();
        let x = pc.solve(&rhs);
        for i in 0..n {
            let ax: f64 = (0..n).map(|j| a[i * n + j] * x[j]).sum();
            assert!((ax - rhs[i]).abs() < 1e-10, "row {i}: {ax} vs {}", rhs[i]);
        }
    }
}
