//! Real sparse matrices in canonical triplet form.
//!
//! Entries are kept sorted by `(row, col)` with no duplicates, so two
//! operators built from the same data compare and serialize identically.
//! [`ComplexCsr`] is the row-compressed complex counterpart used for
//! Hamiltonians.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseOperator {
    /// Builds an operator from unordered triplets. Duplicate positions and
    /// non-finite values are rejected; explicit zeros are kept.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        mut entries: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        for &(r, c, v) in &entries {
            if r >= rows {
                return Err(Error::IndexOutOfRange { index: r, len: rows });
            }
            if c >= cols {
                return Err(Error::IndexOutOfRange { index: c, len: cols });
            }
            if !v.is_finite() {
                return Err(Error::NonFinite("sparse operator entry".into()));
            }
        }
        entries.sort_by_key(|a| (a.0, a.1));
        for pair in entries.windows(2) {
            if pair[0].0 == pair[1].0 && pair[0].1 == pair[1].1 {
                return Err(Error::DuplicateEntry { row: pair[0].0, col: pair[0].1 });
            }
        }
        Ok(Self { rows, cols, entries })
    }

    /// Like [`from_triplets`](Self::from_triplets) but sums duplicates and drops exact zeros.
    pub fn accumulate(rows: usize, cols: usize, mut entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        entries.sort_by_key(|a| (a.0, a.1));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|e| e.2 != 0.0);
        Self::from_triplets(rows, cols, merged)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, entries: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self { rows: n, cols: n, entries: (0..n).map(|i| (i, i, 1.0)).collect() }
    }

    pub fn from_diagonal(values: &[f64]) -> Result<Self> {
        let n = values.len();
        Self::from_triplets(n, n, values.iter().enumerate().map(|(i, &v)| (i, i, v)).collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Canonically ordered `(row, col, value)` entries.
    pub fn triplets(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries
            .binary_search_by(|e| (e.0, e.1).cmp(&(row, col)))
            .map(|i| self.entries[i].2)
            .unwrap_or(0.0)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.rows];
        self.matvec_into(x, &mut y)?;
        Ok(y)
    }

    /// `y = self * x`, overwriting `y`.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, found: x.len() });
        }
        if y.len() != self.rows {
            return Err(Error::DimensionMismatch { expected: self.rows, found: y.len() });
        }
        y.iter_mut().for_each(|v| *v = 0.0);
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
        Ok(())
    }

    pub fn transpose(&self) -> Self {
        let mut entries: Vec<_> = self.entries.iter().map(|&(r, c, v)| (c, r, v)).collect();
        entries.sort_by_key(|a| (a.0, a.1));
        Self { rows: self.cols, cols: self.rows, entries }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|&(r, c, v)| (r, c, v * factor)).collect(),
        }
    }

    /// Entry-wise sum; positions present in both are added.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch { expected: self.rows * self.cols, found: other.rows * other.cols });
        }
        let mut all = self.entries.clone();
        all.extend_from_slice(&other.entries);
        Self::accumulate(self.rows, self.cols, all)
    }

    /// Sparse product `self * other`; exact zeros produced by cancellation are dropped.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch { expected: self.cols, found: other.rows });
        }
        // Row starts of `other` in its canonical (row-sorted) entry list.
        let mut start = vec![0usize; other.rows + 1];
        for e in &other.entries {
            start[e.0 + 1] += 1;
        }
        for r in 0..other.rows {
            start[r + 1] += start[r];
        }
        let mut out = Vec::new();
        let mut acc = vec![0.0; other.cols];
        let mut seen = vec![false; other.cols];
        let mut touched: Vec<usize> = Vec::new();
        let mut k = 0;
        while k < self.entries.len() {
            let row = self.entries[k].0;
            while k < self.entries.len() && self.entries[k].0 == row {
                let (_, mid, v) = self.entries[k];
                for &(_, c, w) in &other.entries[start[mid]..start[mid + 1]] {
                    if !seen[c] {
                        seen[c] = true;
                        touched.push(c);
                    }
                    acc[c] += v * w;
                }
                k += 1;
            }
            for &c in &touched {
                if acc[c] != 0.0 {
                    out.push((row, c, acc[c]));
                }
                acc[c] = 0.0;
                seen[c] = false;
            }
            touched.clear();
        }
        Self::from_triplets(self.rows, other.cols, out)
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max(e.2.abs()))
    }

    /// `max |M + M^T|`; zero exactly for an anti-symmetric operator.
    pub fn antisymmetry_defect(&self) -> f64 {
        self.transpose_combination(1.0)
    }

    /// `max |M - M^T|`; zero exactly for a symmetric operator.
    pub fn symmetry_defect(&self) -> f64 {
        self.transpose_combination(-1.0)
    }

    fn transpose_combination(&self, sign: f64) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for &(r, c, v) in &self.entries {
            worst = worst.max((v + sign * self.get(c, r)).abs());
        }
        worst
    }

    /// Maximum number of stored entries in any row.
    pub fn max_row_nnz(&self) -> usize {
        let mut counts = vec![0usize; self.rows];
        for e in &self.entries {
            counts[e.0] += 1;
        }
        counts.into_iter().max().unwrap_or(0)
    }

    pub fn is_diagonal(&self) -> bool {
        self.rows == self.cols && self.entries.iter().all(|e| e.0 == e.1)
    }

    /// Dense diagonal (zeros where no entry is stored).
    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.rows.min(self.cols)];
        for &(r, c, v) in &self.entries {
            if r == c {
                d[r] = v;
            }
        }
        d
    }

    /// Extracts the rows `row_idx` and columns `col_idx` (in the given order).
    pub fn submatrix(&self, row_idx: &[usize], col_idx: &[usize]) -> Result<Self> {
        let mut row_map = vec![usize::MAX; self.rows];
        for (new, &old) in row_idx.iter().enumerate() {
            if old >= self.rows {
                return Err(Error::IndexOutOfRange { index: old, len: self.rows });
            }
            row_map[old] = new;
        }
        let mut col_map = vec![usize::MAX; self.cols];
        for (new, &old) in col_idx.iter().enumerate() {
            if old >= self.cols {
                return Err(Error::IndexOutOfRange { index: old, len: self.cols });
            }
            col_map[old] = new;
        }
        let entries = self
            .entries
            .iter()
            .filter_map(|&(r, c, v)| {
                let (nr, nc) = (row_map[r], col_map[c]);
                (nr != usize::MAX && nc != usize::MAX).then_some((nr, nc, v))
            })
            .collect();
        Self::from_triplets(row_idx.len(), col_idx.len(), entries)
    }

    /// Places `blocks` (row offset, column offset, operator, factor) into a
    /// `rows x cols` operator.
    pub fn assemble_blocks(rows: usize, cols: usize, blocks: &[(usize, usize, &SparseOperator, f64)]) -> Result<Self> {
        let mut entries = Vec::new();
        for &(ro, co, op, factor) in blocks {
            if ro + op.rows > rows || co + op.cols > cols {
                return Err(Error::DimensionMismatch { expected: rows, found: ro + op.rows });
            }
            entries.extend(op.entries.iter().map(|&(r, c, v)| (r + ro, c + co, v * factor)));
        }
        Self::from_triplets(rows, cols, entries)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for &(r, c, v) in &self.entries {
            m[(r, c)] = v;
        }
        m
    }

    pub fn from_dense(m: &DMatrix<f64>, drop_below: f64) -> Self {
        let mut entries = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let v = m[(r, c)];
                if v.abs() > drop_below {
                    entries.push((r, c, v));
                }
            }
        }
        Self { rows: m.nrows(), cols: m.ncols(), entries }
    }
}

/// Square complex matrix in compressed-row form, used for Hamiltonians.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexCsr {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<Complex64>,
}

impl ComplexCsr {
    /// Builds from triplets sorted by `(row, col)` without duplicates.
    pub fn from_sorted(n: usize, entries: &[(usize, usize, Complex64)]) -> Self {
        let mut row_ptr = vec![0usize; n + 1];
        for e in entries {
            row_ptr[e.0 + 1] += 1;
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            n,
            row_ptr,
            cols: entries.iter().map(|e| e.1).collect(),
            values: entries.iter().map(|e| e.2).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.n).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[range.clone()].binary_search(&c) {
            Ok(k) => self.values[range.start + k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// `y = factor * M x` on the leading `n` entries of `x`/`y`.
    pub fn matvec_scaled_into(&self, factor: f64, x: &[Complex64], y: &mut [Complex64]) {
        for r in 0..self.n {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.cols[k]];
            }
            y[r] = acc * factor;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// `max |M - M^dagger|`.
    pub fn hermiticity_defect(&self) -> f64 {
        self.triplets().fold(0.0, |m, (r, c, v)| m.max((v - self.get(c, r).conj()).norm()))
    }

    /// Maximum stored entries per row.
    pub fn max_row_nnz(&self) -> usize {
        self.row_ptr.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0)
    }

    /// Induced infinity norm (max absolute row sum).
    pub fn inf_norm(&self) -> f64 {
        (0..self.n).map(|r| self.row(r).map(|(_, v)| v.norm()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_are_sorted_and_deduplicated() {
        let op = SparseOperator::from_triplets(2, 2, vec![(1, 0, 2.0), (0, 1, 1.0)]).unwrap();
        assert_eq!(op.triplets(), &[(0, 1, 1.0), (1, 0, 2.0)]);
        assert_eq!(
            SparseOperator::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 0, 2.0)]),
            Err(Error::DuplicateEntry { row: 0, col: 0 })
        );
        assert!(SparseOperator::from_triplets(2, 2, vec![(0, 0, f64::NAN)]).is_err());
        assert!(SparseOperator::from_triplets(2, 2, vec![(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn accumulate_merges_duplicates() {
        let op = SparseOperator::accumulate(2, 2, vec![(0, 0, 1.0), (0, 0, 2.0), (1, 1, 1.0), (1, 1, -1.0)]).unwrap();
        assert_eq!(op.triplets(), &[(0, 0, 3.0)]);
    }

    #[test]
    fn defects_and_transpose() {
        let a = SparseOperator::from_triplets(2, 2, vec![(0, 1, 1.0), (1, 0, -1.0)]).unwrap();
        assert_eq!(a.antisymmetry_defect(), 0.0);
        assert_eq!(a.symmetry_defect(), 2.0);
        assert_eq!(a.transpose().scaled(-1.0), a);
        assert_eq!(a.matvec(&[1.0, 2.0]).unwrap(), vec![2.0, -1.0]);
    }

    #[test]
    fn matmul_matches_dense() {
        let a = SparseOperator::from_triplets(2, 3, vec![(0, 0, 1.0), (0, 2, 2.0), (1, 1, 3.0)]).unwrap();
        let b = SparseOperator::from_triplets(3, 2, vec![(0, 1, 4.0), (1, 0, 5.0), (2, 1, -2.0)]).unwrap();
        let p = a.matmul(&b).unwrap();
        assert_eq!(p.to_dense(), a.to_dense() * b.to_dense());
        // 1*4 + 2*(-2) cancels exactly and is dropped
        assert_eq!(p.triplets(), &[(1, 0, 15.0)]);
    }

    #[test]
    fn submatrix_keeps_requested_order() {
        let m = SparseOperator::from_triplets(3, 3, vec![(0, 0, 1.0), (1, 2, 5.0), (2, 1, 7.0)]).unwrap();
        let s = m.submatrix(&[2, 1], &[1, 2]).unwrap();
        assert_eq!(s.triplets(), &[(0, 0, 7.0), (1, 1, 5.0)]);
    }
}
