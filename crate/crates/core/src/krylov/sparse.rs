//! Compressed sparse storage used throughout the solver.
//!
//! [`SparseSym`] keeps only the lower triangle of a symmetric matrix in
//! compressed-column form; [`CsrMatrix`] is a plain rectangular
//! compressed-row matrix for the off-diagonal coupling blocks.

use std::io::Write;

/// Symmetric matrix stored as its lower triangle in compressed-column form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSym {
    /// Builds the matrix from `(i, j, value)` triplets.
    ///
    /// Entries from either triangle are folded onto the lower one and
    /// duplicates are summed; exact zeros left after summation are dropped.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut entries: Vec<(usize, usize, f64)> = triplets
            .iter()
            .map(|&(i, j, v)| {
                assert!(
                    i < n && j < n,
                    "triplet ({i}, {j}) out of range for n = {n}"
                );
                if i >= j {
                    (j, i, v)
                } else {
                    (i, j, v)
                }
            })
            .collect();
        // (col, row) ordering; stable sort keeps the summation order fixed.
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut col_ptr = vec![0usize; n + 1];
        let mut row_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut k = 0;
        while k < entries.len() {
            let (c, r, mut v) = entries[k];
            k += 1;
            while k < entries.len() && entries[k].0 == c && entries[k].1 == r {
                v += entries[k].2;
                k += 1;
            }
            if v != 0.0 {
                row_idx.push(r);
                values.push(v);
                col_ptr[c + 1] += 1;
            }
        }
        for c in 0..n {
            col_ptr[c + 1] += col_ptr[c];
        }
        SparseSym {
            n,
            col_ptr,
            row_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        let t: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, &t)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored (lower-triangle) nonzeros.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Iterates over the stored lower-triangle entries as `(row, col, value)`.
    pub fn lower_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |c| {
            (self.col_ptr[c]..self.col_ptr[c + 1])
                .map(move |p| (self.row_idx[p], c, self.values[p]))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let rows = &self.row_idx[self.col_ptr[c]..self.col_ptr[c + 1]];
        match rows.binary_search(&r) {
            Ok(p) => self.values[self.col_ptr[c] + p],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x` using both triangles.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        y.iter_mut().for_each(|v| *v = 0.0);
        for c in 0..self.n {
            let xc = x[c];
            let mut acc = 0.0;
            for p in self.col_ptr[c]..self.col_ptr[c + 1] {
                let r = self.row_idx[p];
                let v = self.values[p];
                y[r] += v * xc;
                if r != c {
                    acc += v * x[r];
                }
            }
            y[c] += acc;
        }
    }

    /// Principal submatrix on `keep` (in the given order).
    pub fn submatrix(&self, keep: &[usize]) -> SparseSym {
        let mut local = vec![usize::MAX; self.n];
        for (k, &g) in keep.iter().enumerate() {
            local[g] = k;
        }
        let t: Vec<_> = self
            .lower_entries()
            .filter_map(|(r, c, v)| {
                let (lr, lc) = (local[r], local[c]);
                (lr != usize::MAX && lc != usize::MAX).then_some((lr, lc, v))
            })
            .collect();
        SparseSym::from_triplets(keep.len(), &t)
    }

    /// Off-diagonal block `A[rows, cols]` as a CSR matrix. The two index
    /// sets are expected to be disjoint or the block is taken literally.
    pub fn block(&self, rows: &[usize], cols: &[usize]) -> CsrMatrix {
        let mut rmap = vec![usize::MAX; self.n];
        let mut cmap = vec![usize::MAX; self.n];
        for (k, &g) in rows.iter().enumerate() {
            rmap[g] = k;
        }
        for (k, &g) in cols.iter().enumerate() {
            cmap[g] = k;
        }
        let mut t = Vec::new();
        for (r, c, v) in self.lower_entries() {
            if rmap[r] != usize::MAX && cmap[c] != usize::MAX {
                t.push((rmap[r], cmap[c], v));
            }
            if r != c && rmap[c] != usize::MAX && cmap[r] != usize::MAX {
                t.push((rmap[c], cmap[r], v));
            }
        }
        CsrMatrix::from_triplets(rows.len(), cols.len(), &t)
    }

    /// Full dense copy; intended for tests and desk-scale diagnostics.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for (r, c, v) in self.lower_entries() {
            m[(r, c)] = v;
            m[(c, r)] = v;
        }
        m
    }

    /// Writes both triangles as `i j value` lines.
    pub fn write_triplets<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut all: Vec<(usize, usize, f64)> = Vec::with_capacity(2 * self.nnz());
        for (r, c, v) in self.lower_entries() {
            all.push((r, c, v));
            if r != c {
                all.push((c, r, v));
            }
        }
        all.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        for (r, c, v) in all {
            writeln!(out, "{r} {c} {v:.17e}")?;
        }
        Ok(())
    }
}

/// Rectangular compressed-row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut entries = triplets.to_vec();
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut k = 0;
        while k < entries.len() {
            let (r, c, mut v) = entries[k];
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of range");
            k += 1;
            while k < entries.len() && entries[k].0 == r && entries[k].1 == c {
                v += entries[k].2;
                k += 1;
            }
            if v != 0.0 {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix {
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

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |p| (self.col_idx[p], self.values[p]))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// `y = Aᵀ x`.
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (r, &xr) in x.iter().enumerate() {
            if xr != 0.0 {
                for (c, v) in self.row(r) {
                    y[c] += v * xr;
                }
            }
        }
        y
    }

    /// Column `c` as a dense vector of length `nrows`.
    pub fn dense_column(&self, c: usize) -> Vec<f64> {
        let mut col = vec![0.0; self.nrows];
        for (r, slot) in col.iter_mut().enumerate() {
            for (cc, v) in self.row(r) {
                if cc == c {
                    *slot = v;
                }
            }
        }
        col
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }
}
