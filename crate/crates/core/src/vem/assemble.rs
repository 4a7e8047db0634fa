use crate::error::{Error, Result};
use crate::krylov::{CholeskyFactor, SparseSym};
use crate::mesh::{Point3, PolyMesh};

use super::{element_stiffness, face_projectors, FaceProjector};

/// Right-hand side of the discrete problem.
pub enum LoadSpec<'a> {
    Zero,
    /// Source term `g`, integrated by centroid quadrature and shared
    /// equally among the cell's vertices.
    Function(&'a dyn Fn(&Point3) -> f64),
    /// Load vector over the free dofs, used as is.
    Vector(Vec<f64>),
}

/// Stiffness and load over the free (interior) vertices.
#[derive(Debug, Clone)]
pub struct GlobalSystem {
    pub matrix: SparseSym,
    pub rhs: Vec<f64>,
    /// Free-dof index of every vertex, `None` on the Dirichlet boundary.
    pub dof_of_vertex: Vec<Option<usize>>,
    pub vertex_of_dof: Vec<usize>,
}

impl GlobalSystem {
    pub fn num_dofs(&self) -> usize {
        self.vertex_of_dof.len()
    }

    /// Extends a free-dof vector by zeros on the boundary.
    pub fn to_vertex_values(&self, free: &[f64]) -> Vec<f64> {
        self.dof_of_vertex
            .iter()
            .map(|d| d.map_or(0.0, |d| free[d]))
            .collect()
    }
}

/// Sums element matrices of `cells` into a symmetric matrix over the
/// vertices mapped by `dof_of_vertex`; unmapped vertices are dropped.
pub fn assemble_cells(
    mesh: &PolyMesh,
    cells: &[usize],
    rho: &[f64],
    faces: &[FaceProjector],
    dof_of_vertex: &dyn Fn(usize) -> Option<usize>,
    ndof: usize,
) -> Result<SparseSym> {
    let mut triplets = Vec::new();
    for &c in cells {
        let ops = element_stiffness(mesh, c, rho[c], faces)?;
        let dofs: Vec<Option<usize>> = ops
            .projector
            .vertices
            .iter()
            .map(|&v| dof_of_vertex(v))
            .collect();
        for (i, di) in dofs.iter().enumerate() {
            let Some(di) = *di else { continue };
            for (j, dj) in dofs.iter().enumerate() {
                let Some(dj) = *dj else { continue };
                if di >= dj {
                    triplets.push((di, dj, ops.k_elem[(i, j)]));
                }
            }
        }
    }
    Ok(SparseSym::from_triplets(ndof, &triplets))
}

fn check_rho(mesh: &PolyMesh, rho: &[f64]) -> Result<()> {
    if rho.len() != mesh.num_cells() {
        return Err(Error::Usage(format!(
            "{} coefficients given for {} cells",
            rho.len(),
            mesh.num_cells()
        )));
    }
    if let Some(c) = rho.iter().position(|&r| !(r > 0.0) || !r.is_finite()) {
        return Err(Error::Usage(format!(
            "coefficient of cell {c} is not positive"
        )));
    }
    Ok(())
}

/// Global stiffness with homogeneous Dirichlet conditions eliminated.
///
/// `rho` holds one positive coefficient per cell.
pub fn assemble(mesh: &PolyMesh, rho: &[f64], load: &LoadSpec) -> Result<GlobalSystem> {
    check_rho(mesh, rho)?;
    let mut dof_of_vertex = vec![None; mesh.num_vertices()];
    let mut vertex_of_dof = Vec::new();
    for v in 0..mesh.num_vertices() {
        if !mesh.is_boundary_vertex(v) {
            dof_of_vertex[v] = Some(vertex_of_dof.len());
            vertex_of_dof.push(v);
        }
    }
    let ndof = vertex_of_dof.len();
    if ndof == 0 {
        return Err(Error::Usage("mesh has no interior vertices".into()));
    }
    let faces = face_projectors(mesh)?;
    let cells: Vec<usize> = (0..mesh.num_cells()).collect();
    let matrix = assemble_cells(mesh, &cells, rho, &faces, &|v| dof_of_vertex[v], ndof)?;
    let by_vertex = load_vector(mesh, load)?;
    let rhs = vertex_of_dof.iter().map(|&v| by_vertex[v]).collect();
    Ok(GlobalSystem {
        matrix,
        rhs,
        dof_of_vertex,
        vertex_of_dof,
    })
}

/// Load vector indexed by vertex, zero on the Dirichlet boundary.
///
/// A [`LoadSpec::Vector`] lists the interior vertices in increasing order.
pub fn load_vector(mesh: &PolyMesh, load: &LoadSpec) -> Result<Vec<f64>> {
    let nv = mesh.num_vertices();
    let mut out = vec![0.0; nv];
    match load {
        LoadSpec::Zero => {}
        LoadSpec::Vector(f) => {
            let free: Vec<usize> = (0..nv).filter(|&v| !mesh.is_boundary_vertex(v)).collect();
            if f.len() != free.len() {
                return Err(Error::Usage(format!(
                    "load vector has {} entries, expected {}",
                    f.len(),
                    free.len()
                )));
            }
            for (&v, &x) in free.iter().zip(f) {
                out[v] = x;
            }
        }
        LoadSpec::Function(g) => {
            for c in 0..mesh.num_cells() {
                let geo = mesh.cell_geometry(c)?;
                let verts = mesh.cell_vertices(c);
                let share = g(&geo.centroid) * geo.volume / verts.len() as f64;
                for v in verts {
                    if !mesh.is_boundary_vertex(v) {
                        out[v] += share;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Sparse Cholesky solve; returns values at every vertex (zero on the
/// boundary).
pub fn solve_direct(system: &GlobalSystem) -> Result<Vec<f64>> {
    let factor = CholeskyFactor::new(&system.matrix)?;
    Ok(system.to_vertex_values(&factor.solve(&system.rhs)))
}

/// Solves `-div(ρ∇u) = 0` with Dirichlet data `u = boundary(x)` on ∂Ω by
/// lifting: the boundary values enter the right-hand side through the
/// interior-boundary coupling of the full stiffness matrix.
pub fn solve_lifted(
    mesh: &PolyMesh,
    rho: &[f64],
    boundary: &dyn Fn(&Point3) -> f64,
) -> Result<Vec<f64>> {
    let nv = mesh.num_vertices();
    let lift: Vec<f64> = (0..nv)
        .map(|v| {
            if mesh.is_boundary_vertex(v) {
                boundary(&mesh.vertex(v))
            } else {
                0.0
            }
        })
        .collect();
    check_rho(mesh, rho)?;
    // Nothing to solve for, the lift is the answer.
    if (0..nv).all(|v| mesh.is_boundary_vertex(v)) {
        return Ok(lift);
    }
    let system = assemble(mesh, rho, &LoadSpec::Zero)?;
    let faces = face_projectors(mesh)?;
    let all: Vec<usize> = (0..mesh.num_cells()).collect();
    let full = assemble_cells(mesh, &all, rho, &faces, &|v| Some(v), nv)?;
    let k_lift = full.mul_vec(&lift);
    let rhs: Vec<f64> = system.vertex_of_dof.iter().map(|&v| -k_lift[v]).collect();
    let factor = CholeskyFactor::new(&system.matrix)?;
    let free = factor.solve(&rhs);
    Ok((0..nv)
        .map(|v| system.dof_of_vertex[v].map_or(lift[v], |d| free[d]))
        .collect())
}
