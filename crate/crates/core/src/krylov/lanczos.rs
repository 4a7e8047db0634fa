//! Eigenvalues of the Lanczos tridiagonal matrix recovered from PCG
//! coefficients.

/// Symmetric tridiagonal matrix assembled from the CG step lengths `alpha`
/// and the direction updates `beta`.
///
/// With `k` step lengths the matrix is `k × k`:
/// `T[0][0] = 1/α₀`, `T[j][j] = 1/α_j + β_{j-1}/α_{j-1}`,
/// `T[j][j+1] = √β_j / α_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LanczosTridiagonal {
    pub diag: Vec<f64>,
    pub offdiag: Vec<f64>,
}

impl LanczosTridiagonal {
    pub fn from_cg(alpha: &[f64], beta: &[f64]) -> Self {
        let k = alpha.len();
        assert!(beta.len() + 1 >= k, "need k-1 betas for k alphas");
        let mut diag = Vec::with_capacity(k);
        let mut offdiag = Vec::with_capacity(k.saturating_sub(1));
        for j in 0..k {
            let mut d = 1.0 / alpha[j];
            if j > 0 {
                d += beta[j - 1] / alpha[j - 1];
            }
            diag.push(d);
            if j + 1 < k {
                offdiag.push(beta[j].sqrt() / alpha[j]);
            }
        }
        LanczosTridiagonal { diag, offdiag }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        tridiagonal_eigenvalues(&self.diag, &self.offdiag)
    }

    /// `(λ_min, λ_max)`; `None` for an empty matrix.
    pub fn extremes(&self) -> Option<(f64, f64)> {
        let ev = self.eigenvalues();
        Some((*ev.first()?, *ev.last()?))
    }

    /// Condition number estimate `λ_max / λ_min`; exactly 1 for a 1×1 matrix.
    pub fn condition(&self) -> f64 {
        match self.dim() {
            0 | 1 => 1.0,
            _ => {
                let (lo, hi) = self.extremes().expect("nonempty");
                hi / lo
            }
        }
    }
}

/// Eigenvalues of a symmetric tridiagonal matrix by the QL algorithm with
/// implicit Wilkinson shifts. Returned sorted ascending.
pub fn tridiagonal_eigenvalues(diag: &[f64], offdiag: &[f64]) -> Vec<f64> {
    let n = diag.len();
    if n == 0 {
        return Vec::new();
    }
    assert_eq!(offdiag.len() + 1, n);
    let mut d = diag.to_vec();
    let mut e = offdiag.to_vec();
    e.push(0.0);

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                break;
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    d
}
