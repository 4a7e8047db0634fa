//! Sparse symmetric linear algebra: storage, fill-reducing Cholesky,
//! preconditioned conjugate gradients and Lanczos condition estimates.

pub mod cholesky;
pub mod lanczos;
pub mod ordering;
pub mod pcg;
pub mod sparse;

pub use cholesky::CholeskyFactor;
pub use lanczos::{tridiagonal_eigenvalues, LanczosTridiagonal};
pub use pcg::{pcg, Identity, LinearOperator, PcgOptions, PcgReport};
pub use sparse::{CsrMatrix, SparseSym};

/// Factorizes an SPD matrix (`chol_factor`).
pub fn chol_factor(a: &SparseSym) -> crate::error::Result<CholeskyFactor> {
    CholeskyFactor::new(a)
}
