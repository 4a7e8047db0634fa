//! Dual-primal FETI: change of basis for average constraints, subdomain
//! factorizations, the coarse primal problem, the dual operator
//! `F = B S̃⁻¹ Bᵀ`, the Dirichlet preconditioner `M = B_D S̃ B_Dᵀ` and
//! recovery of the global solution.

mod basis;

use std::io::Write;

use nalgebra::DMatrix;

use crate::decomp::{
    build_jump, classify_interface, primal_constraints, scaling_coefficients, ConstraintKind,
    InterfaceIndex, JumpOperator, Partition, PrimalSpec, Variant,
};
use crate::error::{Error, Result};
use crate::krylov::ordering::{induced_ordering, min_degree};
use crate::krylov::{pcg, CholeskyFactor, CsrMatrix, PcgOptions, PcgReport, SparseSym};
use crate::mesh::PolyMesh;
use crate::vem::{assemble_cells, face_projectors, load_vector, LoadSpec};

pub use basis::{AverageDof, BasisChange};

/// Factorized local problem of one subdomain in the transformed basis.
///
/// Local dofs are the subdomain's non-Dirichlet vertices in increasing
/// order. They split into the primal set `Π` and the remaining set `r`,
/// which in turn holds interior and dual dofs.
#[derive(Debug, Clone)]
pub struct SubdomainSolver {
    pub id: usize,
    pub vertices: Vec<usize>,
    pub basis: BasisChange,
    /// Local indices of the `r` set, increasing.
    pub r: Vec<usize>,
    /// Local indices of the primal dofs and their global primal numbers.
    pub pi: Vec<usize>,
    pub pi_global: Vec<usize>,
    /// Positions within `r` of interior and dual dofs.
    pub interior: Vec<usize>,
    pub dual: Vec<usize>,
    /// Global dual column of each entry of `dual`.
    pub dual_cols: Vec<usize>,
    /// Transformed local stiffness `K̂`.
    pub k_hat: SparseSym,
    k_rr: CholeskyFactor,
    k_rpi: CsrMatrix,
    /// `K_rr⁻¹ K_rΠ`.
    phi: DMatrix<f64>,
    /// `K_ΠΠ − K_Πr K_rr⁻¹ K_rΠ`.
    pub s_pipi: DMatrix<f64>,
    k_ii: Option<CholeskyFactor>,
    k_id: CsrMatrix,
    k_dd: SparseSym,
    /// Transformed local load `Tᵀ f`.
    pub f_hat: Vec<f64>,
}

impl SubdomainSolver {
    /// `S_ΔΔ w = K_ΔΔ w − K_ΔI K_II⁻¹ K_IΔ w` on the dual dofs.
    fn dirichlet_schur(&self, w: &[f64]) -> Vec<f64> {
        let mut out = self.k_dd.mul_vec(w);
        if let Some(k_ii) = &self.k_ii {
            let t = k_ii.solve(&self.k_id.mul_vec(w));
            for (o, c) in out.iter_mut().zip(self.k_id.tr_mul_vec(&t)) {
                *o -= c;
            }
        }
        out
    }
}

/// Assembled and factorized coarse problem `S_ΠΠ = Σ R_ℓᵀ S^ℓ_ΠΠ R_ℓ`.
#[derive(Debug, Clone)]
pub struct CoarseProblem {
    pub matrix: SparseSym,
    factor: CholeskyFactor,
}

impl CoarseProblem {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.factor.solve(b)
    }
}

/// Everything needed to apply `F` and `M` and to recover a solution.
#[derive(Debug, Clone)]
pub struct FetiOperator {
    pub index: InterfaceIndex,
    pub primal: PrimalSpec,
    pub jump: JumpOperator,
    pub subdomains: Vec<SubdomainSolver>,
    pub coarse: CoarseProblem,
    /// Number of interior vertices of the global mesh.
    pub global_dofs: usize,
    num_vertices: usize,
}

/// Outcome of a FETI-DP solve.
#[derive(Debug, Clone)]
pub struct FetiSolution {
    /// Value at every vertex, zero on the Dirichlet boundary.
    pub u: Vec<f64>,
    pub lambda: Vec<f64>,
    pub report: PcgReport,
    /// Largest jump `|B w|` of the recovered subdomain fields.
    pub max_jump: f64,
}

fn local_index(vertices: &[usize], v: usize) -> Option<usize> {
    vertices.binary_search(&v).ok()
}

fn chol(a: &SparseSym, perm: Vec<usize>, what: impl Fn() -> String) -> Result<CholeskyFactor> {
    CholeskyFactor::with_permutation(a, perm).map_err(|e| match e {
        Error::NotPositiveDefinite { row, pivot } => {
            Error::Singular(format!("{}: pivot {pivot:e} at row {row}", what()))
        }
        other => other,
    })
}

impl FetiOperator {
    /// Classifies the interface, selects primal constraints and factorizes
    /// every subdomain and the coarse problem.
    ///
    /// The global load is split evenly among the subdomains sharing a node.
    pub fn new(
        mesh: &PolyMesh,
        part: &Partition,
        variant: Variant,
        gamma: f64,
        load: &LoadSpec,
    ) -> Result<Self> {
        let index = classify_interface(mesh, part)?;
        let primal = primal_constraints(mesh, &index, variant)?;
        let scaling = scaling_coefficients(&index, &part.rho, gamma)?;
        let jump = build_jump(&index, &primal, &scaling);
        let faces = face_projectors(mesh)?;
        let cell_rho = part.cell_rho();
        let f = load_vector(mesh, load)?;
        let nsub = part.num_subdomains();

        let mut owned: Vec<Vec<usize>> = vec![Vec::new(); nsub];
        for (g, c) in primal.constraints.iter().enumerate() {
            for &l in &c.owners {
                owned[l].push(g);
            }
        }

        let mut subdomains = Vec::with_capacity(nsub);
        for l in 0..nsub {
            let vertices: Vec<usize> = part.subdomain_vertices[l]
                .iter()
                .copied()
                .filter(|&v| !mesh.is_boundary_vertex(v))
                .collect();
            let n = vertices.len();
            let k = assemble_cells(
                mesh,
                &part.subdomain_cells[l],
                &cell_rho,
                &faces,
                &|v| local_index(&vertices, v),
                n,
            )?;
            let f_loc: Vec<f64> = vertices
                .iter()
                .map(|&v| f[v] / part.vertex_subdomains[v].len() as f64)
                .collect();

            let mut averages = Vec::new();
            let mut pi = Vec::new();
            let mut pi_global = Vec::new();
            for &g in &owned[l] {
                let c = &primal.constraints[g];
                let loc = |v: usize| {
                    local_index(&vertices, v).ok_or_else(|| {
                        Error::Conformity(format!("constraint {g} reaches outside subdomain {l}"))
                    })
                };
                let p = loc(c.designated)?;
                if !matches!(c.kind, ConstraintKind::Vertex(_)) {
                    let support = c
                        .restricted
                        .iter()
                        .map(|&(v, w)| Ok((loc(v)?, w)))
                        .collect::<Result<Vec<_>>>()?;
                    averages.push(AverageDof {
                        designated: p,
                        support,
                    });
                }
                pi.push(p);
                pi_global.push(g);
            }
            let basis = BasisChange::new(n, averages);
            let k_hat = basis.transform(&k);
            let f_hat = basis.apply_transpose(&f_loc);

            let mut is_pi = vec![false; n];
            for &p in &pi {
                is_pi[p] = true;
            }
            let r: Vec<usize> = (0..n).filter(|&i| !is_pi[i]).collect();
            let mut interior = Vec::new();
            let mut dual = Vec::new();
            let mut dual_cols = Vec::new();
            for (pos, &i) in r.iter().enumerate() {
                let v = vertices[i];
                if part.vertex_subdomains[v].len() > 1 {
                    dual.push(pos);
                    dual_cols.push(jump.column(l, v).ok_or_else(|| {
                        Error::Conformity(format!(
                            "vertex {v} of subdomain {l} has no multiplier column"
                        ))
                    })?);
                } else {
                    interior.push(pos);
                }
            }
            if dual.len() != jump.dual[l].len() {
                return Err(Error::Conformity(format!(
                    "subdomain {l}: {} dual dofs locally, {} in the jump operator",
                    dual.len(),
                    jump.dual[l].len()
                )));
            }

            let k_rr_mat = k_hat.submatrix(&r);
            let order = min_degree(&k_hat);
            let k_rr = chol(&k_rr_mat, induced_ordering(&order, &r), || {
                format!("subdomain {l}: K_rr")
            })?;
            let k_rpi = k_hat.block(&r, &pi);
            let k_pipi = k_hat.submatrix(&pi).to_dense();
            let npi = pi.len();
            let mut phi = DMatrix::zeros(r.len(), npi);
            for c in 0..npi {
                let col = k_rr.solve(&k_rpi.dense_column(c));
                phi.set_column(c, &nalgebra::DVector::from_vec(col));
            }
            let mut s_pipi = k_pipi;
            for b in 0..npi {
                let t = k_rpi.tr_mul_vec(phi.column(b).as_slice());
                for a in 0..npi {
                    s_pipi[(a, b)] -= t[a];
                }
            }
            for a in 0..npi {
                for b in 0..a {
                    let s = 0.5 * (s_pipi[(a, b)] + s_pipi[(b, a)]);
                    s_pipi[(a, b)] = s;
                    s_pipi[(b, a)] = s;
                }
            }

            let i_loc: Vec<usize> = interior.iter().map(|&p| r[p]).collect();
            let d_loc: Vec<usize> = dual.iter().map(|&p| r[p]).collect();
            let k_ii = if i_loc.is_empty() {
                None
            } else {
                let perm = induced_ordering(&order, &i_loc);
                Some(chol(&k_hat.submatrix(&i_loc), perm, || {
                    format!("subdomain {l}: K_II")
                })?)
            };
            let k_id = k_hat.block(&i_loc, &d_loc);
            let k_dd = k_hat.submatrix(&d_loc);

            subdomains.push(SubdomainSolver {
                id: l,
                vertices,
                basis,
                r,
                pi,
                pi_global,
                interior,
                dual,
                dual_cols,
                k_hat,
                k_rr,
                k_rpi,
                phi,
                s_pipi,
                k_ii,
                k_id,
                k_dd,
                f_hat,
            });
        }

        let mut triplets = Vec::new();
        for s in &subdomains {
            for (a, &ga) in s.pi_global.iter().enumerate() {
                for (b, &gb) in s.pi_global.iter().enumerate() {
                    if ga >= gb {
                        triplets.push((ga, gb, s.s_pipi[(a, b)]));
                    }
                }
            }
        }
        let matrix = SparseSym::from_triplets(primal.len(), &triplets);
        let factor = chol(&matrix, min_degree(&matrix), || {
            "coarse problem".to_string()
        })?;

        Ok(FetiOperator {
            index,
            primal,
            jump,
            subdomains,
            coarse: CoarseProblem { matrix, factor },
            global_dofs: (0..mesh.num_vertices())
                .filter(|&v| !mesh.is_boundary_vertex(v))
                .count(),
            num_vertices: mesh.num_vertices(),
        })
    }

    pub fn num_multipliers(&self) -> usize {
        self.jump.num_multipliers()
    }

    pub fn num_primal(&self) -> usize {
        self.primal.len()
    }

    /// `K̃⁻¹ (g_r, g_Π)` by block elimination: local solves, one coarse
    /// solve, back substitution.
    pub fn solve_tilde(&self, g_r: &[Vec<f64>], g_pi: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut y = Vec::with_capacity(self.subdomains.len());
        let mut rhs = g_pi.to_vec();
        for (s, g) in self.subdomains.iter().zip(g_r) {
            let ys = s.k_rr.solve(g);
            for (a, c) in s.k_rpi.tr_mul_vec(&ys).into_iter().enumerate() {
                rhs[s.pi_global[a]] -= c;
            }
            y.push(ys);
        }
        let u_pi = self.coarse.solve(&rhs);
        for (s, ys) in self.subdomains.iter().zip(&mut y) {
            let local: Vec<f64> = s.pi_global.iter().map(|&g| u_pi[g]).collect();
            for (i, yi) in ys.iter_mut().enumerate() {
                *yi -= (0..local.len())
                    .map(|a| s.phi[(i, a)] * local[a])
                    .sum::<f64>();
            }
        }
        (y, u_pi)
    }

    fn scatter_dual(&self, w: &[f64]) -> Vec<Vec<f64>> {
        self.subdomains
            .iter()
            .map(|s| {
                let mut g = vec![0.0; s.r.len()];
                for (&pos, &c) in s.dual.iter().zip(&s.dual_cols) {
                    g[pos] = w[c];
                }
                g
            })
            .collect()
    }

    fn gather_dual(&self, u_r: &[Vec<f64>]) -> Vec<f64> {
        let mut w = vec![0.0; self.jump.num_dual()];
        for (s, u) in self.subdomains.iter().zip(u_r) {
            for (&pos, &c) in s.dual.iter().zip(&s.dual_cols) {
                w[c] = u[pos];
            }
        }
        w
    }

    /// `F λ = B K̃⁻¹ Bᵀ λ`.
    pub fn apply_f(&self, lambda: &[f64]) -> Vec<f64> {
        let g = self.scatter_dual(&self.jump.b.tr_mul_vec(lambda));
        let (u_r, _) = self.solve_tilde(&g, &vec![0.0; self.num_primal()]);
        self.jump.b.mul_vec(&self.gather_dual(&u_r))
    }

    /// `M r = B_D S̃ B_Dᵀ r` with local Dirichlet solves.
    pub fn apply_m(&self, residual: &[f64]) -> Vec<f64> {
        let w = self.jump.b_d.tr_mul_vec(residual);
        let mut z = vec![0.0; w.len()];
        for s in &self.subdomains {
            let wl: Vec<f64> = s.dual_cols.iter().map(|&c| w[c]).collect();
            for (&c, v) in s.dual_cols.iter().zip(s.dirichlet_schur(&wl)) {
                z[c] = v;
            }
        }
        self.jump.b_d.mul_vec(&z)
    }

    fn f_tilde(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut f_pi = vec![0.0; self.num_primal()];
        let f_r = self
            .subdomains
            .iter()
            .map(|s| {
                for (&p, &g) in s.pi.iter().zip(&s.pi_global) {
                    f_pi[g] += s.f_hat[p];
                }
                s.r.iter().map(|&i| s.f_hat[i]).collect()
            })
            .collect();
        (f_r, f_pi)
    }

    /// Right-hand side `d = B K̃⁻¹ f̃` of the dual system.
    pub fn rhs(&self) -> Vec<f64> {
        let (f_r, f_pi) = self.f_tilde();
        let (u_r, _) = self.solve_tilde(&f_r, &f_pi);
        self.jump.b.mul_vec(&self.gather_dual(&u_r))
    }

    /// Subdomain fields `K̃⁻¹ (f̃ − Bᵀλ)` mapped back to vertex values,
    /// then averaged with the scaling weights into one global field.
    /// Also returns the largest remaining jump.
    pub fn recover_solution(&self, lambda: &[f64]) -> (Vec<f64>, f64) {
        let (mut f_r, f_pi) = self.f_tilde();
        let bt = self.scatter_dual(&self.jump.b.tr_mul_vec(lambda));
        for (fr, b) in f_r.iter_mut().zip(&bt) {
            for (x, y) in fr.iter_mut().zip(b) {
                *x -= y;
            }
        }
        let (u_r, u_pi) = self.solve_tilde(&f_r, &f_pi);
        let max_jump = self
            .jump
            .b
            .mul_vec(&self.gather_dual(&u_r))
            .iter()
            .fold(0.0f64, |m, x| m.max(x.abs()));

        let scaling = self.jump.scaling();
        let mut u = vec![0.0; self.num_vertices];
        for (s, ur) in self.subdomains.iter().zip(&u_r) {
            let mut xhat = vec![0.0; s.vertices.len()];
            for (&i, &x) in s.r.iter().zip(ur) {
                xhat[i] = x;
            }
            for (&p, &g) in s.pi.iter().zip(&s.pi_global) {
                xhat[p] = u_pi[g];
            }
            let x = s.basis.apply(&xhat);
            for (&v, xv) in s.vertices.iter().zip(x) {
                let d = if self.index.vertex_subdomains[v].len() > 1 {
                    scaling.d(s.id, v)
                } else {
                    1.0
                };
                u[v] += d * xv;
            }
        }
        (u, max_jump)
    }

    /// PCG on `F λ = d` preconditioned by `M`, then recovery.
    pub fn solve(&self, opts: PcgOptions) -> Result<FetiSolution> {
        let m = self.num_multipliers();
        let d = self.rhs();
        let f_op = (m, |x: &[f64]| self.apply_f(x));
        let m_op = (m, |x: &[f64]| self.apply_m(x));
        let (lambda, report) = pcg(&f_op, &m_op, &d, opts)?;
        let (u, max_jump) = self.recover_solution(&lambda);
        Ok(FetiSolution {
            u,
            lambda,
            report,
            max_jump,
        })
    }

    /// Dense `F` and `M` by applying them to unit vectors. Desk scale only.
    pub fn dense_operators(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let m = self.num_multipliers();
        let mut f = DMatrix::zeros(m, m);
        let mut p = DMatrix::zeros(m, m);
        let mut e = vec![0.0; m];
        for j in 0..m {
            e[j] = 1.0;
            f.set_column(j, &nalgebra::DVector::from_vec(self.apply_f(&e)));
            p.set_column(j, &nalgebra::DVector::from_vec(self.apply_m(&e)));
            e[j] = 0.0;
        }
        (f, p)
    }

    /// Writes dense `F` and `M` as `name row col value` lines, skipping
    /// zeros.
    pub fn write_dense_operators<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let (f, m) = self.dense_operators();
        writeln!(out, "# dim {}", f.nrows())?;
        for (name, a) in [("F", &f), ("M", &m)] {
            for j in 0..a.ncols() {
                for i in 0..a.nrows() {
                    let v = a[(i, j)];
                    if v != 0.0 {
                        writeln!(out, "{name} {i} {j} {v:e}")?;
                    }
                }
            }
        }
        Ok(())
    }
}
