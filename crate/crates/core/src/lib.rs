//! Lowest-order virtual elements on polyhedral meshes with a FETI-DP
//! domain decomposition solver.

pub mod decomp;
pub mod error;
pub mod experiment;
pub mod fetidp;
pub mod krylov;
pub mod mesh;
pub mod vem;

pub use error::{Error, Result};
