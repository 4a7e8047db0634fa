//! Assembling an `N³` subdomain mesh from one reference mesh of the unit
//! cube by rescaling and mirroring.

use std::collections::HashMap;

use super::{OrientedFace, Point3, PolyMesh};
use crate::error::{Error, Result};

/// Absolute node-merge tolerance.
pub const GLUE_TOL: f64 = 1e-9;

/// Tiles the unit cube with `n³` scaled copies of `reference`.
///
/// Copy `(i, j, k)` is mirrored along each axis whose index is odd, so
/// neighbouring copies meet with mirror-image face traces. Cells are
/// numbered copy by copy, with copy index `i + n (j + n k)`.
pub fn glue_reflected(reference: &PolyMesh, n: usize) -> Result<PolyMesh> {
    if n == 0 {
        return Err(Error::Usage(
            "number of subdomains per axis must be at least 1".into(),
        ));
    }
    let (lo, hi) = reference.bounding_box();
    if lo.norm() > GLUE_TOL || (hi - Point3::repeat(1.0)).norm() > GLUE_TOL {
        return Err(Error::Conformity(format!(
            "reference mesh spans [{:?}, {:?}], not the unit cube",
            lo.as_slice(),
            hi.as_slice()
        )));
    }
    if n == 1 {
        return Ok(reference.canonicalized());
    }

    let h = 1.0 / n as f64;
    let mut merger = Merger::new(GLUE_TOL);
    let mut faces: Vec<Vec<usize>> = Vec::new();
    let mut cells: Vec<Vec<OrientedFace>> = Vec::with_capacity(reference.num_cells() * n * n * n);
    // Boundary faces of a copy that lie on an interior subdomain interface,
    // keyed by sorted vertex set, waiting for their partner.
    let mut pending: HashMap<Vec<usize>, usize> = HashMap::new();

    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let ijk = [i, j, k];
                let flip = [i % 2 == 1, j % 2 == 1, k % 2 == 1];
                let odd = flip.iter().filter(|&&f| f).count() % 2 == 1;
                let vmap: Vec<usize> = reference
                    .vertices()
                    .iter()
                    .map(|p| {
                        let mut q = Point3::zeros();
                        for a in 0..3 {
                            let x = if flip[a] { 1.0 - p[a] } else { p[a] };
                            q[a] = (ijk[a] as f64 + x) * h;
                        }
                        merger.insert(q)
                    })
                    .collect();

                let mut fmap = vec![usize::MAX; reference.num_faces()];
                let mut reused = vec![false; reference.num_faces()];
                for f in 0..reference.num_faces() {
                    let mut loop_: Vec<usize> =
                        reference.face(f).iter().map(|&v| vmap[v]).collect();
                    if odd {
                        loop_.reverse();
                    }
                    if reference.is_boundary_face(f) && on_interface(&merger, &loop_, n) {
                        let mut key = loop_.clone();
                        key.sort_unstable();
                        if let Some(other) = pending.remove(&key) {
                            // Created by the neighbouring copy, seen here from
                            // the other side.
                            fmap[f] = other;
                            reused[f] = true;
                            continue;
                        }
                        pending.insert(key, faces.len());
                    }
                    fmap[f] = faces.len();
                    faces.push(loop_);
                }
                for c in 0..reference.num_cells() {
                    cells.push(
                        reference
                            .cell(c)
                            .iter()
                            .map(|of| OrientedFace {
                                face: fmap[of.face],
                                outward: of.outward != reused[of.face],
                            })
                            .collect(),
                    );
                }
            }
        }
    }
    if let Some((_, &f)) = pending.iter().next() {
        return Err(Error::Conformity(format!(
            "nonconforming glue: interface face with vertices {:?} has no partner",
            faces[f]
        )));
    }
    PolyMesh::new(merger.points, faces, cells).map(|m| m.canonicalized())
}

/// True when every vertex of the loop lies on one interior subdomain plane.
fn on_interface(merger: &Merger, loop_: &[usize], n: usize) -> bool {
    for axis in 0..3 {
        let x = merger.points[loop_[0]][axis] * n as f64;
        let level = x.round();
        if (x - level).abs() > GLUE_TOL * n as f64 || level <= 0.0 || level >= n as f64 {
            continue;
        }
        if loop_
            .iter()
            .all(|&v| (merger.points[v][axis] * n as f64 - level).abs() <= GLUE_TOL * n as f64)
        {
            return true;
        }
    }
    false
}

struct Merger {
    tol: f64,
    points: Vec<Point3>,
    grid: HashMap<[i64; 3], Vec<usize>>,
}

impl Merger {
    fn new(tol: f64) -> Self {
        Merger {
            tol,
            points: Vec::new(),
            grid: HashMap::new(),
        }
    }

    fn key(&self, p: &Point3) -> [i64; 3] {
        let s = 4.0 * self.tol;
        [
            (p.x / s).floor() as i64,
            (p.y / s).floor() as i64,
            (p.z / s).floor() as i64,
        ]
    }

    fn insert(&mut self, p: Point3) -> usize {
        let k = self.key(&p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(list) = self.grid.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        if let Some(&i) = list
                            .iter()
                            .find(|&&i| (self.points[i] - p).norm() <= self.tol)
                        {
                            return i;
                        }
                    }
                }
            }
        }
        let i = self.points.len();
        self.points.push(p);
        self.grid.entry(k).or_default().push(i);
        i
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_cube_grid, generate_truncated_octahedra};

    #[test]
    fn glued_cube_grid_equals_finer_grid() {
        let g = glue_reflected(&generate_cube_grid(2), 2).unwrap();
        let fine = generate_cube_grid(4);
        assert_eq!(g.num_cells(), fine.num_cells());
        assert_eq!(g.num_vertices(), fine.num_vertices());
        assert_eq!(g.num_faces(), fine.num_faces());
    }

    #[test]
    fn glued_octahedra_volume() {
        let g = glue_reflected(&generate_truncated_octahedra(1), 2).unwrap();
        let vol: f64 = (0..g.num_cells())
            .map(|c| g.cell_geometry(c).unwrap().volume)
            .sum();
        assert!((vol - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reference_must_fill_the_unit_cube() {
        let err = glue_reflected(&generate_cube_grid(2).scaled(0.5), 2).unwrap_err();
        assert!(matches!(err, Error::Conformity(_)), "{err}");
    }
}
