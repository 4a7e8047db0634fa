use crate::krylov::SparseSym;

/// One average constraint in local numbering: the designated dof `p` and
/// the functional weights `ω_j` over its support (which contains `p`).
#[derive(Debug, Clone)]
pub struct AverageDof {
    pub designated: usize,
    pub support: Vec<(usize, f64)>,
}

impl AverageDof {
    fn omega_p(&self) -> f64 {
        self.support
            .iter()
            .find(|(j, _)| *j == self.designated)
            .map(|(_, w)| *w)
            .expect("designated dof lies in the support")
    }
}

/// Local change of variables `x = T x̂` where `x̂_p` is the value of an
/// average functional and every other coordinate is unchanged.
///
/// Supports of different averages are disjoint.
#[derive(Debug, Clone, Default)]
pub struct BasisChange {
    pub dim: usize,
    pub averages: Vec<AverageDof>,
}

impl BasisChange {
    pub fn new(dim: usize, averages: Vec<AverageDof>) -> Self {
        BasisChange { dim, averages }
    }

    /// Row `i` of `T` as `(column, value)`.
    fn row(&self, i: usize, designated: &[Option<usize>]) -> Vec<(usize, f64)> {
        match designated[i] {
            None => vec![(i, 1.0)],
            Some(a) => {
                let avg = &self.averages[a];
                let wp = avg.omega_p();
                avg.support
                    .iter()
                    .map(|&(j, w)| if j == i { (j, 1.0 / wp) } else { (j, -w / wp) })
                    .collect()
            }
        }
    }

    fn designated_map(&self) -> Vec<Option<usize>> {
        let mut m = vec![None; self.dim];
        for (a, avg) in self.averages.iter().enumerate() {
            m[avg.designated] = Some(a);
        }
        m
    }

    /// `x = T x̂`.
    pub fn apply(&self, xhat: &[f64]) -> Vec<f64> {
        let mut x = xhat.to_vec();
        for avg in &self.averages {
            let wp = avg.omega_p();
            let mut s = xhat[avg.designated];
            for &(j, w) in &avg.support {
                if j != avg.designated {
                    s -= w * xhat[j];
                }
            }
            x[avg.designated] = s / wp;
        }
        x
    }

    /// `x̂ = T⁻¹ x`.
    pub fn apply_inverse(&self, x: &[f64]) -> Vec<f64> {
        let mut xhat = x.to_vec();
        for avg in &self.averages {
            xhat[avg.designated] = avg.support.iter().map(|&(j, w)| w * x[j]).sum();
        }
        xhat
    }

    /// `Tᵀ f`.
    pub fn apply_transpose(&self, f: &[f64]) -> Vec<f64> {
        let mut out = f.to_vec();
        for avg in &self.averages {
            let wp = avg.omega_p();
            let fp = f[avg.designated];
            out[avg.designated] = fp / wp;
            for &(j, w) in &avg.support {
                if j != avg.designated {
                    out[j] -= w / wp * fp;
                }
            }
        }
        out
    }

    /// `K̂ = Tᵀ K T`.
    pub fn transform(&self, k: &SparseSym) -> SparseSym {
        if self.averages.is_empty() {
            return k.clone();
        }
        let designated = self.designated_map();
        let rows: Vec<Vec<(usize, f64)>> =
            (0..self.dim).map(|i| self.row(i, &designated)).collect();
        let mut triplets = Vec::new();
        let mut push = |i: usize, j: usize, v: f64| {
            for &(a, ta) in &rows[i] {
                for &(b, tb) in &rows[j] {
                    if a >= b {
                        triplets.push((a, b, ta * v * tb));
                    }
                }
            }
        };
        for (i, j, v) in k.lower_entries() {
            push(i, j, v);
            if i != j {
                push(j, i, v);
            }
        }
        SparseSym::from_triplets(self.dim, &triplets)
    }
}
