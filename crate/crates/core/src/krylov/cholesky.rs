//! Sparse Cholesky factorization `P A Pᵀ = L Lᵀ`.
//!
//! Symbolic analysis follows the elimination tree of the permuted matrix
//! and groups columns with nested structure into supernodes. The numeric
//! phase is left-looking: each supernode panel gathers the updates of its
//! descendants through dense products, then is factored in place.

use nalgebra::{DMatrix, DMatrixView};

use super::ordering::min_degree;
use super::sparse::SparseSym;
use crate::error::{Error, Result};

/// Lower-triangular factor together with its fill-reducing permutation.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    n: usize,
    /// `perm[k]` = original row placed at position `k`.
    perm: Vec<usize>,
    /// First column of each supernode, plus `n` at the end.
    sup_cols: Vec<usize>,
    /// Row structure of each supernode (diagonal block first).
    sup_rows_ptr: Vec<usize>,
    sup_rows: Vec<usize>,
    /// Column-major dense panel of each supernode.
    sup_vals_ptr: Vec<usize>,
    values: Vec<f64>,
}

impl CholeskyFactor {
    /// Factorizes with an approximate-minimum-degree ordering.
    pub fn new(a: &SparseSym) -> Result<Self> {
        let perm = min_degree(a);
        Self::with_permutation(a, perm)
    }

    /// Factorizes with a caller-supplied ordering.
    pub fn with_permutation(a: &SparseSym, perm: Vec<usize>) -> Result<Self> {
        let n = a.dim();
        assert_eq!(perm.len(), n, "permutation length mismatch");
        let mut inv = vec![usize::MAX; n];
        for (k, &p) in perm.iter().enumerate() {
            assert!(inv[p] == usize::MAX, "not a permutation");
            inv[p] = k;
        }

        // Upper triangle of C = P A Pᵀ by columns (for the symbolic phase)
        // and lower triangle by columns (for assembly).
        let mut ucount = vec![0usize; n + 1];
        for (r, c, _) in a.lower_entries() {
            ucount[inv[r].max(inv[c]) + 1] += 1;
        }
        for k in 0..n {
            ucount[k + 1] += ucount[k];
        }
        let mut lcount = vec![0usize; n + 1];
        for (r, c, _) in a.lower_entries() {
            lcount[inv[r].min(inv[c]) + 1] += 1;
        }
        for k in 0..n {
            lcount[k + 1] += lcount[k];
        }
        let mut unext = ucount.clone();
        let mut lnext = lcount.clone();
        let mut urow = vec![0usize; a.nnz()];
        let mut lrow = vec![0usize; a.nnz()];
        let mut lval = vec![0.0; a.nnz()];
        for (r, c, v) in a.lower_entries() {
            let (i, k) = {
                let (pr, pc) = (inv[r], inv[c]);
                (pr.min(pc), pr.max(pc))
            };
            urow[unext[k]] = i;
            unext[k] += 1;
            lrow[lnext[i]] = k;
            lval[lnext[i]] = v;
            lnext[i] += 1;
        }
        let ucol = ucount;
        let lcol = lcount;

        let parent = etree(n, &ucol, &urow);

        // Column counts of L via row patterns.
        let mut counts = vec![1usize; n];
        let mut stack = vec![0usize; n];
        let mut flag = vec![usize::MAX; n];
        for k in 0..n {
            let top = ereach(k, &ucol, &urow, &parent, &mut stack, &mut flag);
            for &j in &stack[top..] {
                counts[j] += 1;
            }
        }

        // Fundamental supernodes: j joins j-1 when j is its parent and the
        // structures nest.
        let mut sup_cols = Vec::new();
        let mut sup_of = vec![0usize; n];
        for j in 0..n {
            let joins = j > 0 && parent[j - 1] == j && counts[j - 1] == counts[j] + 1;
            if !joins {
                sup_cols.push(j);
            }
            sup_of[j] = sup_cols.len() - 1;
        }
        let nsup = sup_cols.len();
        sup_cols.push(n);

        // Row structure of each supernode = structure of its first column.
        let mut sup_rows_ptr = vec![0usize; nsup + 1];
        for s in 0..nsup {
            sup_rows_ptr[s + 1] = sup_rows_ptr[s] + counts[sup_cols[s]];
        }
        let mut sup_rows = vec![0usize; sup_rows_ptr[nsup]];
        let mut fill: Vec<usize> = sup_rows_ptr[..nsup].to_vec();
        flag.iter_mut().for_each(|f| *f = usize::MAX);
        for k in 0..n {
            let top = ereach(k, &ucol, &urow, &parent, &mut stack, &mut flag);
            for &j in &stack[top..] {
                let s = sup_of[j];
                if sup_cols[s] == j {
                    sup_rows[fill[s]] = k;
                    fill[s] += 1;
                }
            }
            let s = sup_of[k];
            if sup_cols[s] == k {
                sup_rows[fill[s]] = k;
                fill[s] += 1;
            }
        }
        // Rows arrive in increasing k, except the diagonal which comes last
        // among rows ≤ k; sort to be safe.
        for s in 0..nsup {
            sup_rows[sup_rows_ptr[s]..sup_rows_ptr[s + 1]].sort_unstable();
        }

        let mut sup_vals_ptr = vec![0usize; nsup + 1];
        for s in 0..nsup {
            let m = sup_rows_ptr[s + 1] - sup_rows_ptr[s];
            let w = sup_cols[s + 1] - sup_cols[s];
            sup_vals_ptr[s + 1] = sup_vals_ptr[s] + m * w;
        }
        let mut values = vec![0.0; sup_vals_ptr[nsup]];

        // Left-looking numeric phase. `head[s]` links the supernodes that
        // still have to update `s`; `next_pos[d]` is the first row of `d`
        // not yet consumed.
        let mut head = vec![usize::MAX; nsup];
        let mut link = vec![usize::MAX; nsup];
        let mut next_pos = vec![0usize; nsup];
        let mut rel = vec![0usize; n];
        for s in 0..nsup {
            let (f, l) = (sup_cols[s], sup_cols[s + 1]);
            let w = l - f;
            let rows = &sup_rows[sup_rows_ptr[s]..sup_rows_ptr[s + 1]];
            let m = rows.len();
            for (k, &r) in rows.iter().enumerate() {
                rel[r] = k;
            }
            let (done, rest) = values.split_at_mut(sup_vals_ptr[s]);
            let panel = &mut rest[..m * w];
            for j in f..l {
                for p in lcol[j]..lcol[j + 1] {
                    panel[(j - f) * m + rel[lrow[p]]] += lval[p];
                }
            }

            let mut d = head[s];
            while d != usize::MAX {
                let next_d = link[d];
                let drows = &sup_rows[sup_rows_ptr[d]..sup_rows_ptr[d + 1]];
                let md = drows.len();
                let wd = sup_cols[d + 1] - sup_cols[d];
                let pos = next_pos[d];
                let mut c1 = 0;
                while pos + c1 < md && drows[pos + c1] < l {
                    c1 += 1;
                }
                let c2 = md - pos;
                let dpanel =
                    DMatrixView::from_slice(&done[sup_vals_ptr[d]..sup_vals_ptr[d + 1]], md, wd);
                let below = dpanel.rows(pos, c2);
                let top = dpanel.rows(pos, c1);
                let u: DMatrix<f64> = below * top.transpose();
                for jj in 0..c1 {
                    let col = drows[pos + jj] - f;
                    let base = col * m;
                    for ii in jj..c2 {
                        panel[base + rel[drows[pos + ii]]] -= u[(ii, jj)];
                    }
                }
                next_pos[d] = pos + c1;
                if pos + c1 < md {
                    let t = sup_of[drows[pos + c1]];
                    link[d] = head[t];
                    head[t] = d;
                }
                d = next_d;
            }

            // Dense right-looking factorization of the m × w panel.
            for j in 0..w {
                let pivot = panel[j * m + j];
                if !(pivot > 0.0) {
                    return Err(Error::NotPositiveDefinite {
                        row: perm[f + j],
                        pivot,
                    });
                }
                let sq = pivot.sqrt();
                for v in &mut panel[j * m + j..(j + 1) * m] {
                    *v /= sq;
                }
                for k in j + 1..w {
                    let lkj = panel[j * m + k];
                    if lkj == 0.0 {
                        continue;
                    }
                    let (src, dst) = panel.split_at_mut(k * m);
                    let src = &src[j * m + k..(j + 1) * m];
                    for (x, y) in dst[k..m].iter_mut().zip(src) {
                        *x -= lkj * y;
                    }
                }
            }

            if w < m {
                next_pos[s] = w;
                let t = sup_of[rows[w]];
                link[s] = head[t];
                head[t] = s;
            }
        }

        Ok(CholeskyFactor {
            n,
            perm,
            sup_cols,
            sup_rows_ptr,
            sup_rows,
            sup_vals_ptr,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored entries of `L`, counting the lower triangle of each
    /// diagonal block only.
    pub fn nnz(&self) -> usize {
        (0..self.sup_cols.len() - 1)
            .map(|s| {
                let m = self.sup_rows_ptr[s + 1] - self.sup_rows_ptr[s];
                let w = self.sup_cols[s + 1] - self.sup_cols[s];
                m * w - w * (w - 1) / 2
            })
            .sum()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    fn panel(&self, s: usize) -> (&[usize], &[f64], usize) {
        let rows = &self.sup_rows[self.sup_rows_ptr[s]..self.sup_rows_ptr[s + 1]];
        let vals = &self.values[self.sup_vals_ptr[s]..self.sup_vals_ptr[s + 1]];
        (rows, vals, self.sup_cols[s + 1] - self.sup_cols[s])
    }

    /// Dense copy of `L` (in permuted ordering); for tests.
    pub fn l_dense(&self) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.n, self.n);
        for s in 0..self.sup_cols.len() - 1 {
            let (rows, vals, w) = self.panel(s);
            let m = rows.len();
            let f = self.sup_cols[s];
            for j in 0..w {
                for i in j..m {
                    l[(rows[i], f + j)] = vals[j * m + i];
                }
            }
        }
        l
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        let nsup = self.sup_cols.len() - 1;
        // L y = P b
        for s in 0..nsup {
            let (rows, vals, w) = self.panel(s);
            let m = rows.len();
            let f = self.sup_cols[s];
            for j in 0..w {
                let col = &vals[j * m..(j + 1) * m];
                let yj = y[f + j] / col[j];
                y[f + j] = yj;
                for i in j + 1..m {
                    y[rows[i]] -= col[i] * yj;
                }
            }
        }
        // Lᵀ x = y
        for s in (0..nsup).rev() {
            let (rows, vals, w) = self.panel(s);
            let m = rows.len();
            let f = self.sup_cols[s];
            for j in (0..w).rev() {
                let col = &vals[j * m..(j + 1) * m];
                let mut acc = y[f + j];
                for i in j + 1..m {
                    acc -= col[i] * y[rows[i]];
                }
                y[f + j] = acc / col[j];
            }
        }
        for (k, &p) in self.perm.iter().enumerate() {
            b[p] = y[k];
        }
    }
}

/// Elimination tree from the upper-triangular column structure.
fn etree(n: usize, col: &[usize], row: &[usize]) -> Vec<usize> {
    let mut parent = vec![usize::MAX; n];
    let mut ancestor = vec![usize::MAX; n];
    for k in 0..n {
        for p in col[k]..col[k + 1] {
            let mut i = row[p];
            while i != usize::MAX && i < k {
                let next = ancestor[i];
                ancestor[i] = k;
                if next == usize::MAX {
                    parent[i] = k;
                }
                i = next;
            }
        }
    }
    parent
}

/// Nonzero pattern of row `k` of `L` (excluding the diagonal), returned in
/// `stack[top..]` in topological order.
fn ereach(
    k: usize,
    col: &[usize],
    row: &[usize],
    parent: &[usize],
    stack: &mut [usize],
    flag: &mut [usize],
) -> usize {
    let n = parent.len();
    let mut top = n;
    flag[k] = k;
    for p in col[k]..col[k + 1] {
        let mut i = row[p];
        if i > k {
            continue;
        }
        let mut len = 0;
        while flag[i] != k {
            stack[len] = i;
            len += 1;
            flag[i] = k;
            i = parent[i];
        }
        while len > 0 {
            top -= 1;
            len -= 1;
            stack[top] = stack[len];
        }
    }
    top
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_factor_is_identity() {
        let f = CholeskyFactor::new(&SparseSym::identity(5)).unwrap();
        assert_eq!(f.l_dense(), nalgebra::DMatrix::identity(5, 5));
    }

    #[test]
    fn two_by_two_closed_form() {
        let a = SparseSym::from_triplets(2, &[(0, 0, 4.0), (1, 0, 1.0), (1, 1, 3.0)]);
        let f = CholeskyFactor::with_permutation(&a, vec![0, 1]).unwrap();
        let l = f.l_dense();
        assert_abs_diff_eq!(l[(0, 0)], 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(l[(1, 0)], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(l[(1, 1)], 2.75f64.sqrt(), epsilon = 1e-15);
        assert_eq!(l[(0, 1)], 0.0);
    }

    #[test]
    fn indefinite_reports_original_row() {
        let a = SparseSym::from_triplets(3, &[(0, 0, 1.0), (1, 1, -2.0), (2, 2, 1.0)]);
        match CholeskyFactor::with_permutation(&a, vec![2, 0, 1]) {
            Err(Error::NotPositiveDefinite { row, .. }) => assert_eq!(row, 1),
            other => panic!("expected pivot failure, got {other:?}"),
        }
    }

    #[test]
    fn solves_random_spd() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 60;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 8.0));
            for _ in 0..3 {
                let j = rng.random_range(0..n);
                if j != i {
                    let v: f64 = rng.random_range(-1.0..1.0);
                    t.push((i, j, v));
                    t.push((i, i, v.abs()));
                    t.push((j, j, v.abs()));
                }
            }
        }
        let a = SparseSym::from_triplets(n, &t);
        let f = CholeskyFactor::new(&a).unwrap();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = f.solve(&b);
        let r: f64 = a
            .mul_vec(&x)
            .iter()
            .zip(&b)
            .map(|(ax, bi)| (ax - bi).powi(2))
            .sum::<f64>()
            .sqrt();
        let bn: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(r / bn < 1e-13, "relative residual {}", r / bn);
    }
}
