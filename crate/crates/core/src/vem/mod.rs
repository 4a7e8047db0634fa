//! Lowest-order virtual elements: face and element projectors, element
//! stiffness, load, and global assembly with homogeneous Dirichlet data.

mod assemble;

use nalgebra::{DMatrix, Matrix3, Matrix4};

use crate::error::{Error, Result};
use crate::mesh::{plane_basis, Point3, PolyMesh};

pub use assemble::{
    assemble, assemble_cells, load_vector, solve_direct, solve_lifted, GlobalSystem, LoadSpec,
};

/// Energy projector of a face onto `{1, ξ, η}`, where `(ξ, η)` are in-plane
/// coordinates centred at the face centroid and scaled by its diameter.
#[derive(Debug, Clone)]
pub struct FaceProjector {
    pub vertices: Vec<usize>,
    pub centroid: Point3,
    pub normal: Point3,
    pub e1: Point3,
    pub e2: Point3,
    pub diameter: f64,
    pub area: f64,
    /// `3 × k` map from vertex values to monomial coefficients.
    pub coeffs: DMatrix<f64>,
    weights: Vec<f64>,
}

impl FaceProjector {
    /// Weights of the face-average functional `|f|⁻¹∫_f Π v`.
    pub fn average_weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn project(&self, dofs: &[f64]) -> [f64; 3] {
        let mut c = [0.0; 3];
        for (r, cr) in c.iter_mut().enumerate() {
            *cr = (0..dofs.len()).map(|j| self.coeffs[(r, j)] * dofs[j]).sum();
        }
        c
    }

    /// In-plane scaled coordinates `(ξ, η)` of a point.
    pub fn local(&self, x: &Point3) -> [f64; 2] {
        let d = x - self.centroid;
        [
            d.dot(&self.e1) / self.diameter,
            d.dot(&self.e2) / self.diameter,
        ]
    }
}

pub fn face_projector(mesh: &PolyMesh, face: usize) -> Result<FaceProjector> {
    let geo = mesh.face_geometry(face)?;
    let vertices = mesh.face(face).to_vec();
    let k = vertices.len();
    let (e1, e2) = plane_basis(&geo.normal);
    let d = geo.diameter;
    let pts: Vec<Point3> = vertices.iter().map(|&v| mesh.vertex(v)).collect();

    // Row 0: vertex sums; rows 1-2: gradient part from Green's formula.
    let mut g = Matrix3::zeros();
    g[(0, 0)] = k as f64;
    for p in &pts {
        let x = p - geo.centroid;
        g[(0, 1)] += x.dot(&e1) / d;
        g[(0, 2)] += x.dot(&e2) / d;
    }
    g[(1, 1)] = geo.area / (d * d);
    g[(2, 2)] = geo.area / (d * d);

    let mut b = DMatrix::zeros(3, k);
    for j in 0..k {
        b[(0, j)] = 1.0;
    }
    for i in 0..k {
        let j = (i + 1) % k;
        // Outward edge normal times edge length.
        let nu = (pts[j] - pts[i]).cross(&geo.normal);
        for (a, e) in [(1, e1), (2, e2)] {
            let flux = e.dot(&nu) / d * 0.5;
            b[(a, i)] += flux;
            b[(a, j)] += flux;
        }
    }
    let ginv = g
        .try_inverse()
        .ok_or_else(|| Error::Numerical(format!("face {face}: singular projector system")))?;
    let coeffs = DMatrix::from_fn(3, k, |r, c| (0..3).map(|s| ginv[(r, s)] * b[(s, c)]).sum());
    let weights = (0..k).map(|j| coeffs[(0, j)]).collect();
    Ok(FaceProjector {
        vertices,
        centroid: geo.centroid,
        normal: geo.normal,
        e1,
        e2,
        diameter: d,
        area: geo.area,
        coeffs,
        weights,
    })
}

/// Face projectors of every face of the mesh.
pub fn face_projectors(mesh: &PolyMesh) -> Result<Vec<FaceProjector>> {
    (0..mesh.num_faces())
        .map(|f| face_projector(mesh, f))
        .collect()
}

/// `|f|⁻¹∫_f Π∇_f v` for vertex values `dofs` (in face-loop order).
pub fn face_average(mesh: &PolyMesh, face: usize, dofs: &[f64]) -> Result<f64> {
    let p = face_projector(mesh, face)?;
    Ok(p.average_weights()
        .iter()
        .zip(dofs)
        .map(|(w, v)| w * v)
        .sum())
}

/// Energy projector of a cell onto `{1, x̄, ȳ, z̄}` (centroid-centred,
/// diameter-scaled).
#[derive(Debug, Clone)]
pub struct ElementProjector {
    /// Sorted cell vertices; the column order of all element matrices.
    pub vertices: Vec<usize>,
    pub centroid: Point3,
    pub diameter: f64,
    pub volume: f64,
    /// `4 × n` map from vertex values to monomial coefficients.
    pub pi: DMatrix<f64>,
    /// `n × 4` monomials evaluated at the vertices.
    pub d: DMatrix<f64>,
}

pub fn element_projector(
    mesh: &PolyMesh,
    cell: usize,
    faces: &[FaceProjector],
) -> Result<ElementProjector> {
    let geo = mesh.cell_geometry(cell)?;
    let vertices = mesh.cell_vertices(cell);
    let n = vertices.len();
    let hk = geo.diameter;
    let local = |v: usize| {
        vertices
            .binary_search(&v)
            .expect("face vertex belongs to cell")
    };

    let d = DMatrix::from_fn(n, 4, |i, b| {
        if b == 0 {
            1.0
        } else {
            (mesh.vertex(vertices[i])[b - 1] - geo.centroid[b - 1]) / hk
        }
    });
    let mut g = Matrix4::zeros();
    for b in 0..4 {
        g[(0, b)] = (0..n).map(|i| d[(i, b)]).sum();
    }
    for a in 1..4 {
        g[(a, a)] = geo.volume / (hk * hk);
    }

    let mut rhs = DMatrix::zeros(4, n);
    for j in 0..n {
        rhs[(0, j)] = 1.0;
    }
    for of in mesh.cell(cell) {
        let fp = &faces[of.face];
        let n_out = fp.normal * of.sign();
        for (w, &v) in fp.average_weights().iter().zip(&fp.vertices) {
            let j = local(v);
            for a in 1..4 {
                rhs[(a, j)] += n_out[a - 1] / hk * fp.area * w;
            }
        }
    }
    let ginv = g
        .try_inverse()
        .ok_or_else(|| Error::Numerical(format!("cell {cell}: singular projector system")))?;
    let pi = DMatrix::from_fn(4, n, |r, c| {
        (0..4).map(|s| ginv[(r, s)] * rhs[(s, c)]).sum()
    });
    Ok(ElementProjector {
        vertices,
        centroid: geo.centroid,
        diameter: hk,
        volume: geo.volume,
        pi,
        d,
    })
}

/// Local operators of one cell.
#[derive(Debug, Clone)]
pub struct ElementOps {
    pub projector: ElementProjector,
    pub k_cons: DMatrix<f64>,
    pub k_stab: DMatrix<f64>,
    /// `ρ_K (K_cons + K_stab)`.
    pub k_elem: DMatrix<f64>,
    /// Load weights: `∫_K g v_h ≈ Σ_i load[i] g(x_K) v_i`.
    pub load: Vec<f64>,
}

pub fn element_stiffness(
    mesh: &PolyMesh,
    cell: usize,
    rho: f64,
    faces: &[FaceProjector],
) -> Result<ElementOps> {
    let projector = element_projector(mesh, cell, faces)?;
    let n = projector.vertices.len();
    let pi = &projector.pi;
    let grad = projector.volume / (projector.diameter * projector.diameter);

    let mut k_cons = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            k_cons[(i, j)] = grad * (1..4).map(|a| pi[(a, i)] * pi[(a, j)]).sum::<f64>();
        }
    }
    let mut r = -(&projector.d * pi);
    for i in 0..n {
        r[(i, i)] += 1.0;
    }
    let k_stab = r.transpose() * &r * projector.diameter;
    let mut k_elem = (&k_cons + &k_stab) * rho;
    // Symmetric to the last bit.
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (k_elem[(i, j)] + k_elem[(j, i)]);
            k_elem[(i, j)] = s;
            k_elem[(j, i)] = s;
        }
    }
    let load = vec![projector.volume / n as f64; n];
    Ok(ElementOps {
        projector,
        k_cons,
        k_stab,
        k_elem,
        load,
    })
}

#[cfg(test)]
mod tests;
