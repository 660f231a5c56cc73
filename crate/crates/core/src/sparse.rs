//! Compressed sparse row complex operators.
//!
//! Every operator in the simulator (ladder operators, Hamiltonians, the
//! vectorized Lindbladian) is stored as a [`SparseOperator`]. Assembly goes
//! through triplets; duplicates are summed and exact zeros are dropped, so the
//! stored pattern is canonical (sorted columns per row, no repeats).

use faer::{Mat, MatMut, MatRef};
use num_complex::Complex64 as c64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<c64>,
}

impl SparseOperator {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diagonal(&vec![c64::new(1.0, 0.0); dim])
    }

    pub fn from_diagonal(diag: &[c64]) -> Self {
        let n = diag.len();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n);
        indptr.push(0);
        for (i, &v) in diag.iter().enumerate() {
            if v != c64::new(0.0, 0.0) {
                indices.push(i);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Self {
            rows: n,
            cols: n,
            indptr,
            indices,
            values,
        }
    }

    /// Assembles from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, c64)]) -> Result<Self> {
        for &(r, c, _) in triplets {
            if r >= rows || c >= cols {
                return Err(Error::IndexOutOfRange {
                    row: r,
                    col: c,
                    rows,
                    cols,
                });
            }
        }
        let mut sorted: Vec<(usize, usize, c64)> = triplets.to_vec();
        sorted.sort_unstable_by_key(|t| (t.0, t.1));

        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<c64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        Ok(Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        }
        .pruned())
    }

    fn from_rows(rows: usize, cols: usize, row_entries: Vec<Vec<(usize, c64)>>) -> Self {
        let mut indptr = Vec::with_capacity(rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut entries in row_entries {
            entries.sort_unstable_by_key(|e| e.0);
            let mut last = None;
            for (c, v) in entries {
                if last == Some(c) {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    values.push(v);
                    last = Some(c);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        }
        .pruned()
    }

    /// Drops stored entries that are exactly zero.
    fn pruned(self) -> Self {
        if self.values.iter().all(|v| *v != c64::new(0.0, 0.0)) {
            return self;
        }
        let mut indptr = Vec::with_capacity(self.rows + 1);
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut values = Vec::with_capacity(self.values.len());
        indptr.push(0);
        for r in 0..self.rows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                if self.values[k] != c64::new(0.0, 0.0) {
                    indices.push(self.indices[k]);
                    values.push(self.values[k]);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            rows: self.rows,
            cols: self.cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Entry `(row, col)`, zero when not stored.
    pub fn get(&self, row: usize, col: usize) -> c64 {
        let range = self.indptr[row]..self.indptr[row + 1];
        match self.indices[range.clone()].binary_search(&col) {
            Ok(k) => self.values[range.start + k],
            Err(_) => c64::new(0.0, 0.0),
        }
    }

    /// Iterates stored entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, c64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            (self.indptr[r]..self.indptr[r + 1]).map(move |k| (r, self.indices[k], self.values[k]))
        })
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, c64)> + '_ {
        (self.indptr[r]..self.indptr[r + 1]).map(move |k| (self.indices[k], self.values[k]))
    }

    pub fn transpose(&self) -> Self {
        let mut rows: Vec<Vec<(usize, c64)>> = vec![Vec::new(); self.cols];
        for (r, c, v) in self.iter() {
            rows[c].push((r, v));
        }
        Self::from_rows(self.cols, self.rows, rows)
    }

    pub fn conj(&self) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v = v.conj();
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        self.transpose().conj()
    }

    pub fn scale(&self, s: c64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= s;
        }
        out.pruned()
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(c64::new(s, 0.0))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let rows = (0..self.rows)
            .map(|r| self.row(r).chain(other.row(r)).collect())
            .collect();
        Ok(Self::from_rows(self.rows, self.cols, rows))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale_real(-1.0))
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        let rows = (0..self.rows)
            .map(|r| {
                let mut acc = Vec::new();
                for (k, a) in self.row(r) {
                    for (c, b) in other.row(k) {
                        acc.push((c, a * b));
                    }
                }
                acc
            })
            .collect();
        Ok(Self::from_rows(self.rows, other.cols, rows))
    }

    /// `[A, B] = AB - BA`.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.matmul(other)?.sub(&other.matmul(self)?)
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let rows = self.rows * other.rows;
        let cols = self.cols * other.cols;
        let mut row_entries = Vec::with_capacity(rows);
        for ra in 0..self.rows {
            for rb in 0..other.rows {
                let mut entries = Vec::new();
                for (ca, va) in self.row(ra) {
                    for (cb, vb) in other.row(rb) {
                        entries.push((ca * other.cols + cb, va * vb));
                    }
                }
                row_entries.push(entries);
            }
        }
        Self::from_rows(rows, cols, row_entries)
    }

    pub fn to_dense(&self) -> Mat<c64> {
        let mut m = Mat::<c64>::zeros(self.rows, self.cols);
        for (r, c, v) in self.iter() {
            m[(r, c)] = v;
        }
        m
    }

    pub fn from_dense(m: MatRef<'_, c64>) -> Self {
        let rows = (0..m.nrows())
            .map(|r| {
                (0..m.ncols())
                    .filter(|&c| m[(r, c)] != c64::new(0.0, 0.0))
                    .map(|c| (c, m[(r, c)]))
                    .collect()
            })
            .collect();
        Self::from_rows(m.nrows(), m.ncols(), rows)
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        let d = self.sub(other)?;
        Ok(d.values.iter().map(|v| v.norm()).fold(0.0, f64::max))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Induced infinity norm (maximum absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|r| self.row(r).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && self.max_abs_diff(&self.adjoint()).is_ok_and(|d| d <= tol)
    }

    /// Diagonal entries.
    pub fn diagonal(&self) -> Vec<c64> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        self.iter().all(|(r, c, _)| r == c)
    }

    /// `out += alpha * self * x` for dense `x`.
    pub fn mul_dense_into(&self, x: MatRef<'_, c64>, alpha: c64, mut out: MatMut<'_, c64>) {
        assert_eq!(self.cols, x.nrows());
        assert_eq!(out.nrows(), self.rows);
        assert_eq!(out.ncols(), x.ncols());
        for j in 0..x.ncols() {
            let xc = x.col(j);
            let mut oc = out.as_mut().col_mut(j);
            for r in 0..self.rows {
                let mut acc = c64::new(0.0, 0.0);
                for k in self.indptr[r]..self.indptr[r + 1] {
                    acc += self.values[k] * xc[self.indices[k]];
                }
                oc[r] += alpha * acc;
            }
        }
    }

    /// `out += alpha * x * self` for dense `x`.
    pub fn dense_mul_into(&self, x: MatRef<'_, c64>, alpha: c64, mut out: MatMut<'_, c64>) {
        assert_eq!(x.ncols(), self.rows);
        assert_eq!(out.nrows(), x.nrows());
        assert_eq!(out.ncols(), self.cols);
        for (k, j, a) in self.iter() {
            let s = alpha * a;
            let xc = x.col(k);
            let mut oc = out.as_mut().col_mut(j);
            for i in 0..x.nrows() {
                oc[i] += s * xc[i];
            }
        }
    }

    pub fn mul_dense(&self, x: MatRef<'_, c64>) -> Mat<c64> {
        let mut out = Mat::<c64>::zeros(self.rows, x.ncols());
        self.mul_dense_into(x, c64::new(1.0, 0.0), out.as_mut());
        out
    }

    pub fn dense_mul(&self, x: MatRef<'_, c64>) -> Mat<c64> {
        let mut out = Mat::<c64>::zeros(x.nrows(), self.cols);
        self.dense_mul_into(x, c64::new(1.0, 0.0), out.as_mut());
        out
    }

    /// Sparse matrix-vector product.
    pub fn mul_vec(&self, x: &[c64]) -> Vec<c64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// Replaces row `r` with the given entries.
    pub fn with_row_replaced(&self, r: usize, entries: &[(usize, c64)]) -> Result<Self> {
        if r >= self.rows {
            return Err(Error::IndexOutOfRange {
                row: r,
                col: 0,
                rows: self.rows,
                cols: self.cols,
            });
        }
        if let Some(&(c, _)) = entries.iter().find(|e| e.0 >= self.cols) {
            return Err(Error::IndexOutOfRange {
                row: r,
                col: c,
                rows: self.rows,
                cols: self.cols,
            });
        }
        let rows = (0..self.rows)
            .map(|i| {
                if i == r {
                    entries.to_vec()
                } else {
                    self.row(i).collect()
                }
            })
            .collect();
        Ok(Self::from_rows(self.rows, self.cols, rows))
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.rows != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                found: other.rows,
            });
        }
        if self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: other.cols,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> c64 {
        c64::new(re, im)
    }

    #[test]
    fn triplets_merge_duplicates_and_drop_zeros() {
        let a = SparseOperator::from_triplets(
            2,
            2,
            &[(0, 1, c(1.0, 0.0)), (0, 1, c(2.0, 1.0)), (1, 0, c(1.0, 0.0)), (1, 0, c(-1.0, 0.0))],
        )
        .unwrap();
        assert_eq!(a.nnz(), 1);
        assert_eq!(a.get(0, 1), c(3.0, 1.0));
        assert_eq!(a.get(1, 0), c(0.0, 0.0));
    }

    #[test]
    fn out_of_range_triplet_rejected() {
        let err = SparseOperator::from_triplets(2, 2, &[(2, 0, c(1.0, 0.0))]).unwrap_err();
        assert!(matches!(err, Error::IndexOutOfRange { .. }));
    }

    #[test]
    fn kron_matches_dense_definition() {
        let a = SparseOperator::from_triplets(2, 2, &[(0, 1, c(1.0, 2.0)), (1, 1, c(3.0, 0.0))]).unwrap();
        let b = SparseOperator::from_triplets(2, 3, &[(0, 0, c(0.5, 0.0)), (1, 2, c(0.0, -1.0))]).unwrap();
        let k = a.kron(&b);
        assert_eq!((k.rows(), k.cols()), (4, 6));
        for i in 0..2 {
            for j in 0..2 {
                for p in 0..2 {
                    for q in 0..3 {
                        assert_eq!(k.get(i * 2 + p, j * 3 + q), a.get(i, j) * b.get(p, q));
                    }
                }
            }
        }
    }

    #[test]
    fn dense_products_agree_with_sparse_matmul() {
        let a = SparseOperator::from_triplets(
            3,
            3,
            &[(0, 1, c(1.0, 2.0)), (1, 2, c(3.0, 0.0)), (2, 0, c(0.0, 1.0)), (1, 1, c(-1.0, 0.5))],
        )
        .unwrap();
        let x = Mat::<c64>::from_fn(3, 3, |i, j| c(i as f64 + 0.5 * j as f64, j as f64 - 1.0));
        let xs = SparseOperator::from_dense(x.as_ref());
        let left = a.mul_dense(x.as_ref());
        let right = a.dense_mul(x.as_ref());
        let left_ref = a.matmul(&xs).unwrap().to_dense();
        let right_ref = xs.matmul(&a).unwrap().to_dense();
        for i in 0..3 {
            for j in 0..3 {
                assert!((left[(i, j)] - left_ref[(i, j)]).norm() < 1e-14);
                assert!((right[(i, j)] - right_ref[(i, j)]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn row_replacement() {
        let a = SparseOperator::identity(3);
        let b = a.with_row_replaced(1, &[(0, c(1.0, 0.0)), (2, c(1.0, 0.0))]).unwrap();
        assert_eq!(b.get(1, 1), c(0.0, 0.0));
        assert_eq!(b.get(1, 0), c(1.0, 0.0));
        assert_eq!(b.get(1, 2), c(1.0, 0.0));
        assert_eq!(b.get(2, 2), c(1.0, 0.0));
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = SparseOperator::identity(2);
        let b = SparseOperator::identity(3);
        assert!(a.add(&b).is_err());
        assert!(a.matmul(&b).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_op() -> impl Strategy<Value = SparseOperator> {
            (1usize..6, 1usize..6).prop_flat_map(|(r, cc)| {
                proptest::collection::vec((0..r, 0..cc, -2.0f64..2.0, -2.0f64..2.0), 0..20).prop_map(
                    move |t| {
                        let t: Vec<_> = t.into_iter().map(|(i, j, a, b)| (i, j, c64::new(a, b))).collect();
                        SparseOperator::from_triplets(r, cc, &t).unwrap()
                    },
                )
            })
        }

        proptest! {
            #[test]
            fn adjoint_is_an_involution(a in arb_op()) {
                prop_assert_eq!(a.adjoint().adjoint(), a);
            }

            #[test]
            fn canonical_pattern(a in arb_op()) {
                for r in 0..a.rows() {
                    let cols: Vec<usize> = a.row(r).map(|e| e.0).collect();
                    prop_assert!(cols.windows(2).all(|w| w[0] < w[1]));
                }
            }
        }
    }
}
