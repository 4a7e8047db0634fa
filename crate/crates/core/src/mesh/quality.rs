//! Shape-regularity diagnostics.

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};

use super::{plane_basis, Point3, PolyMesh};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshQuality {
    /// Largest cell diameter.
    pub h: f64,
    /// Smallest distance between two vertices of the same cell.
    pub h_min: f64,
    /// Smallest shape-regularity constant over all cells.
    pub gamma_star: f64,
}

pub fn mesh_quality(mesh: &PolyMesh) -> Result<MeshQuality> {
    let mut q = MeshQuality {
        h: 0.0,
        h_min: f64::INFINITY,
        gamma_star: f64::INFINITY,
    };
    for c in 0..mesh.num_cells() {
        let verts = mesh.cell_vertices(c);
        for (i, &a) in verts.iter().enumerate() {
            for &b in &verts[i + 1..] {
                q.h_min = q.h_min.min((mesh.vertex(a) - mesh.vertex(b)).norm());
            }
        }
        q.h = q.h.max(mesh.cell_geometry(c)?.diameter);
        q.gamma_star = q.gamma_star.min(cell_gamma(mesh, c)?);
    }
    Ok(q)
}

/// Shape-regularity constant of one convex cell with `h` its diameter:
/// the minimum of `|K|/h³`, `|f|/h²`, `|e|/h`, the face inradii over `h`,
/// the cell inradius over `h`, and for each face the height over `h` of
/// the tallest pyramid on that face with apex above its incentre.
///
/// Inradii are Chebyshev radii, which for convex sets are the largest
/// radii of balls (discs) the set is star-shaped with respect to.
pub fn cell_gamma(mesh: &PolyMesh, c: usize) -> Result<f64> {
    let geo = mesh.cell_geometry(c)?;
    let h = geo.diameter;
    let verts = mesh.cell_vertices(c);

    // Outward unit normals and offsets of the face planes.
    let mut planes = Vec::with_capacity(mesh.cell(c).len());
    for of in mesh.cell(c) {
        let fg = mesh.face_geometry(of.face)?;
        let n = fg.normal * of.sign();
        let b = n.dot(&fg.centroid);
        if let Some(&v) = verts
            .iter()
            .find(|&&v| n.dot(&mesh.vertex(v)) - b > 1e-10 * h)
        {
            return Err(Error::Unsupported(format!(
                "cell {c} is not convex (vertex {v} lies outside the plane of face {})",
                of.face
            )));
        }
        planes.push((of.face, n, b, fg));
    }

    let mut gamma = geo.volume / h.powi(3);
    for (a, b) in mesh.cell_edges(c) {
        gamma = gamma.min((mesh.vertex(a) - mesh.vertex(b)).norm() / h);
    }

    let cell_rows: Vec<(Vector3<f64>, f64)> = planes.iter().map(|(_, n, b, _)| (*n, *b)).collect();
    let (_, r_cell) = chebyshev_3d(&cell_rows, geo.centroid, h)
        .ok_or_else(|| Error::Numerical(format!("no interior ball found for cell {c}")))?;
    gamma = gamma.min(r_cell / h);

    for (i, (f, n, _, fg)) in planes.iter().enumerate() {
        gamma = gamma.min(fg.area / (h * h));
        let (center, r) = face_incircle(mesh, *f, fg.centroid, fg.normal)
            .ok_or_else(|| Error::Unsupported(format!("face {f} of cell {c} is not convex")))?;
        gamma = gamma.min(r / h);
        // Apex x_f - t n stays in K while every other face plane allows it.
        let mut height = f64::INFINITY;
        for (j, (_, m, b, _)) in planes.iter().enumerate() {
            let slope = -m.dot(n);
            if j != i && slope > 1e-14 {
                height = height.min((b - m.dot(&center)) / slope);
            }
        }
        gamma = gamma.min(height / h);
    }
    Ok(gamma)
}

/// Chebyshev centre of the polygon `f` and its inradius.
fn face_incircle(
    mesh: &PolyMesh,
    f: usize,
    centroid: Point3,
    normal: Point3,
) -> Option<(Point3, f64)> {
    let (e1, e2) = plane_basis(&normal);
    let pts: Vec<[f64; 2]> = mesh
        .face(f)
        .iter()
        .map(|&v| {
            let d = mesh.vertex(v) - centroid;
            [d.dot(&e1), d.dot(&e2)]
        })
        .collect();
    let k = pts.len();
    let scale = pts.iter().map(|p| p[0].hypot(p[1])).fold(0.0, f64::max);
    let mut rows = Vec::with_capacity(k);
    for i in 0..k {
        let (a, b) = (pts[i], pts[(i + 1) % k]);
        // Counter-clockwise loop: interior lies to the left of each edge.
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let len = dx.hypot(dy);
        if len <= 1e-14 * scale {
            continue;
        }
        let n = [dy / len, -dx / len];
        let off = n[0] * a[0] + n[1] * a[1];
        if pts
            .iter()
            .any(|p| n[0] * p[0] + n[1] * p[1] - off > 1e-10 * scale)
        {
            return None;
        }
        rows.push((n, off));
    }
    let mut best: Option<([f64; 2], f64)> = None;
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            for l in j + 1..rows.len() {
                let idx = [i, j, l];
                let m = Matrix3::from_fn(|r, c| if c < 2 { rows[idx[r]].0[c] } else { 1.0 });
                let rhs = Vector3::from_fn(|r, _| rows[idx[r]].1);
                let Some(sol) = m.lu().solve(&rhs) else {
                    continue;
                };
                let (x, rad) = ([sol[0], sol[1]], sol[2]);
                let feasible = rows
                    .iter()
                    .all(|(n, off)| n[0] * x[0] + n[1] * x[1] + rad <= off + 1e-12 * scale);
                if feasible && rad >= 0.0 && best.map_or(true, |(_, r)| rad > r) {
                    best = Some((x, rad));
                }
            }
        }
    }
    best.map(|(x, r)| (centroid + e1 * x[0] + e2 * x[1], r))
}

/// Chebyshev centre and radius of `{x : nᵢ·x ≤ bᵢ}` (unit `nᵢ`), by
/// enumerating the vertices of the lifted polytope in `(x, r)`.
fn chebyshev_3d(rows: &[(Vector3<f64>, f64)], shift: Point3, scale: f64) -> Option<(Point3, f64)> {
    // Work relative to an interior point for conditioning.
    let rows: Vec<(Vector3<f64>, f64)> =
        rows.iter().map(|(n, b)| (*n, b - n.dot(&shift))).collect();
    let m = rows.len();
    let mut best: Option<(Vector3<f64>, f64)> = None;
    for a in 0..m {
        for b in a + 1..m {
            for c in b + 1..m {
                for d in c + 1..m {
                    let idx = [a, b, c, d];
                    let mat =
                        Matrix4::from_fn(|r, col| if col < 3 { rows[idx[r]].0[col] } else { 1.0 });
                    let rhs = Vector4::from_fn(|r, _| rows[idx[r]].1);
                    let Some(sol) = mat.lu().solve(&rhs) else {
                        continue;
                    };
                    let x = Vector3::new(sol[0], sol[1], sol[2]);
                    let rad = sol[3];
                    if !rad.is_finite() || rad < 0.0 || best.is_some_and(|(_, r)| rad <= r) {
                        continue;
                    }
                    if rows
                        .iter()
                        .all(|(n, off)| n.dot(&x) + rad <= off + 1e-12 * scale)
                    {
                        best = Some((x, rad));
                    }
                }
            }
        }
    }
    best.map(|(x, r)| (x + shift, r))
}
