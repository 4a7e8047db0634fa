use crate::error::{Error, Result};
use crate::krylov::CsrMatrix;

use super::{InterfaceIndex, PrimalSpec};

/// Weights `d^{ℓ,i} = ρ_ℓ^γ / Σ_{k∈N_i} ρ_k^γ`.
#[derive(Debug, Clone)]
pub struct Scaling {
    pub gamma: f64,
    /// Aligned with `InterfaceIndex::vertex_subdomains`.
    coeffs: Vec<Vec<f64>>,
    subdomains: Vec<Vec<usize>>,
}

impl Scaling {
    /// `d^{ℓ,i}`; zero when `ℓ ∉ N_i`.
    pub fn d(&self, l: usize, vertex: usize) -> f64 {
        match self.subdomains[vertex].binary_search(&l) {
            Ok(k) => self.coeffs[vertex][k],
            Err(_) => 0.0,
        }
    }

    /// `(ℓ, d^{ℓ,i})` for every `ℓ ∈ N_i`.
    pub fn node(&self, vertex: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.subdomains[vertex]
            .iter()
            .copied()
            .zip(self.coeffs[vertex].iter().copied())
    }
}

pub fn scaling_coefficients(index: &InterfaceIndex, rho: &[f64], gamma: f64) -> Result<Scaling> {
    let nsub = index.n.pow(3);
    if rho.len() != nsub {
        return Err(Error::Usage(format!(
            "{} coefficients for {nsub} subdomains",
            rho.len()
        )));
    }
    if let Some(l) = rho.iter().position(|&r| !(r > 0.0) || !r.is_finite()) {
        return Err(Error::Usage(format!(
            "coefficient of subdomain {l} is not positive"
        )));
    }
    if !(gamma >= 0.5) || !gamma.is_finite() {
        return Err(Error::Usage(format!(
            "scaling exponent {gamma} must be at least 1/2"
        )));
    }
    let powered: Vec<f64> = rho.iter().map(|r| r.powf(gamma)).collect();
    let coeffs = index
        .vertex_subdomains
        .iter()
        .map(|subs| {
            let total: f64 = subs.iter().map(|&l| powered[l]).sum();
            subs.iter().map(|&l| powered[l] / total).collect()
        })
        .collect();
    Ok(Scaling {
        gamma,
        coeffs,
        subdomains: index.vertex_subdomains.clone(),
    })
}

/// Fully redundant jump operator on the dual dofs and its scaled
/// counterpart.
///
/// Columns enumerate dual dof instances subdomain by subdomain; within a
/// subdomain they follow `dual[ℓ]`.
#[derive(Debug, Clone)]
pub struct JumpOperator {
    /// Dual vertices of each subdomain, sorted.
    pub dual: Vec<Vec<usize>>,
    /// Column offset of each subdomain; `offsets[L]` is the column count.
    pub offsets: Vec<usize>,
    /// `(vertex, ℓ, k)` with `ℓ < k` for every multiplier.
    pub rows: Vec<(usize, usize, usize)>,
    pub b: CsrMatrix,
    pub b_d: CsrMatrix,
    scaling: Scaling,
}

impl JumpOperator {
    pub fn num_multipliers(&self) -> usize {
        self.rows.len()
    }

    pub fn num_dual(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Column of the instance of `vertex` in subdomain `l`.
    pub fn column(&self, l: usize, vertex: usize) -> Option<usize> {
        self.dual[l]
            .binary_search(&vertex)
            .ok()
            .map(|k| self.offsets[l] + k)
    }

    pub fn scaling(&self) -> &Scaling {
        &self.scaling
    }

    /// Weighted average `E_D`: every instance of node `i` receives
    /// `Σ_k d^{k,i} w^k_i`.
    pub fn average(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; w.len()];
        for (l, verts) in self.dual.iter().enumerate() {
            for (k, &v) in verts.iter().enumerate() {
                let mut s = 0.0;
                for (m, d) in self.scaling.node(v) {
                    let c = self
                        .column(m, v)
                        .expect("dual node present in all its subdomains");
                    s += d * w[c];
                }
                out[self.offsets[l] + k] = s;
            }
        }
        out
    }
}

/// Builds `B` and `B_D` over the dual nodes left by `primal`.
pub fn build_jump(index: &InterfaceIndex, primal: &PrimalSpec, scaling: &Scaling) -> JumpOperator {
    let nsub = index.n.pow(3);
    let mut is_primal = vec![false; index.vertex_subdomains.len()];
    for c in &primal.constraints {
        is_primal[c.designated] = true;
    }
    let mut dual = vec![Vec::new(); nsub];
    for &v in &index.interface {
        if !is_primal[v] {
            for &l in &index.vertex_subdomains[v] {
                dual[l].push(v);
            }
        }
    }
    let mut offsets = Vec::with_capacity(nsub + 1);
    offsets.push(0);
    for d in &dual {
        offsets.push(offsets.last().unwrap() + d.len());
    }
    let col = |l: usize, v: usize| offsets[l] + dual[l].binary_search(&v).expect("dual node");

    let mut rows = Vec::new();
    let mut tb = Vec::new();
    let mut td = Vec::new();
    for &v in &index.interface {
        if is_primal[v] {
            continue;
        }
        let subs = &index.vertex_subdomains[v];
        for (a, &l) in subs.iter().enumerate() {
            for &k in &subs[a + 1..] {
                let r = rows.len();
                rows.push((v, l, k));
                tb.push((r, col(l, v), 1.0));
                tb.push((r, col(k, v), -1.0));
                td.push((r, col(l, v), scaling.d(k, v)));
                td.push((r, col(k, v), -scaling.d(l, v)));
            }
        }
    }
    let ncols = *offsets.last().unwrap();
    let b = CsrMatrix::from_triplets(rows.len(), ncols, &tb);
    let b_d = CsrMatrix::from_triplets(rows.len(), ncols, &td);
    JumpOperator {
        dual,
        offsets,
        rows,
        b,
        b_d,
        scaling: scaling.clone(),
    }
}
