//! Polyhedral meshes: storage, validation, geometric primitives, structured
//! generators, `.poly3d` ingestion and shape-regularity diagnostics.

mod generate;
mod glue;
mod io;
mod quality;

use std::collections::HashMap;

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub use generate::{generate_cube_grid, generate_truncated_octahedra};
pub use glue::glue_reflected;
pub use io::{parse_polymesh, read_polymesh, write_polymesh, write_polymesh_to};
pub use quality::{cell_gamma, mesh_quality, MeshQuality};

pub type Point3 = Vector3<f64>;

/// Relative tolerance for face planarity.
pub const PLANARITY_TOL: f64 = 1e-10;

/// A face as seen from one cell: `outward` is true when the face's stored
/// normal (right-hand rule on its vertex loop) points out of the cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OrientedFace {
    pub face: usize,
    pub outward: bool,
}

impl OrientedFace {
    pub fn sign(&self) -> f64 {
        if self.outward {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceGeometry {
    pub area: f64,
    pub centroid: Point3,
    /// Unit normal consistent with the stored vertex loop.
    pub normal: Point3,
    pub diameter: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGeometry {
    pub volume: f64,
    pub centroid: Point3,
    pub diameter: f64,
}

/// Conforming polyhedral tessellation.
///
/// Immutable once built; [`PolyMesh::new`] checks every structural and
/// geometric invariant and derives the boundary vertex tags.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyMesh {
    vertices: Vec<Point3>,
    faces: Vec<Vec<usize>>,
    cells: Vec<Vec<OrientedFace>>,
    boundary: Vec<bool>,
    face_cells: Vec<Vec<usize>>,
}

impl PolyMesh {
    pub fn new(
        vertices: Vec<Point3>,
        faces: Vec<Vec<usize>>,
        cells: Vec<Vec<OrientedFace>>,
    ) -> Result<Self> {
        let nv = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            if f.len() < 3 {
                return Err(Error::Invariant(format!(
                    "face {fi} has fewer than 3 vertices"
                )));
            }
            if let Some(&v) = f.iter().find(|&&v| v >= nv) {
                return Err(Error::Invariant(format!(
                    "face {fi} references missing vertex {v}"
                )));
            }
            let mut sorted = f.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Invariant(format!("face {fi} repeats a vertex")));
            }
        }

        let mut face_cells = vec![Vec::new(); faces.len()];
        for (ci, c) in cells.iter().enumerate() {
            if c.len() < 4 {
                return Err(Error::Invariant(format!(
                    "cell {ci} has fewer than 4 faces"
                )));
            }
            for of in c {
                if of.face >= faces.len() {
                    return Err(Error::Invariant(format!(
                        "cell {ci} references missing face {}",
                        of.face
                    )));
                }
                if face_cells[of.face].contains(&ci) {
                    return Err(Error::Invariant(format!(
                        "cell {ci} lists face {} twice",
                        of.face
                    )));
                }
                face_cells[of.face].push(ci);
            }
        }
        for (fi, fc) in face_cells.iter().enumerate() {
            match fc.len() {
                0 => return Err(Error::Invariant(format!("face {fi} belongs to no cell"))),
                1 => {}
                2 => {
                    let s0 = orientation_in(&cells[fc[0]], fi);
                    let s1 = orientation_in(&cells[fc[1]], fi);
                    if s0 == s1 {
                        return Err(Error::Invariant(format!(
                            "face {fi} has the same orientation in cells {} and {}",
                            fc[0], fc[1]
                        )));
                    }
                }
                k => {
                    return Err(Error::Conformity(format!(
                        "face {fi} is referenced by {k} cells"
                    )))
                }
            }
        }

        let mut boundary = vec![false; nv];
        let mut used = vec![false; nv];
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                used[v] = true;
                if face_cells[fi].len() == 1 {
                    boundary[v] = true;
                }
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(Error::Invariant(format!(
                "vertex {v} is not used by any face"
            )));
        }

        let mesh = PolyMesh {
            vertices,
            faces,
            cells,
            boundary,
            face_cells,
        };
        mesh.check_duplicate_vertices()?;
        for fi in 0..mesh.faces.len() {
            mesh.face_geometry(fi)?;
            mesh.check_simple(fi)?;
        }
        for ci in 0..mesh.cells.len() {
            mesh.check_closed(ci)?;
            mesh.cell_geometry(ci)?;
        }
        Ok(mesh)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Point3 {
        self.vertices[v]
    }

    pub fn faces(&self) -> &[Vec<usize>] {
        &self.faces
    }

    pub fn face(&self, f: usize) -> &[usize] {
        &self.faces[f]
    }

    pub fn cells(&self) -> &[Vec<OrientedFace>] {
        &self.cells
    }

    pub fn cell(&self, c: usize) -> &[OrientedFace] {
        &self.cells[c]
    }

    /// Cells incident to a face (one for boundary faces, two otherwise).
    pub fn face_cells(&self, f: usize) -> &[usize] {
        &self.face_cells[f]
    }

    pub fn is_boundary_face(&self, f: usize) -> bool {
        self.face_cells[f].len() == 1
    }

    pub fn boundary_tags(&self) -> &[bool] {
        &self.boundary
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary[v]
    }

    /// Sorted, deduplicated vertex indices of a cell.
    pub fn cell_vertices(&self, c: usize) -> Vec<usize> {
        let mut vs: Vec<usize> = self.cells[c]
            .iter()
            .flat_map(|of| self.faces[of.face].iter().copied())
            .collect();
        vs.sort_unstable();
        vs.dedup();
        vs
    }

    /// Unique undirected edges of a cell as sorted vertex pairs.
    pub fn cell_edges(&self, c: usize) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = self.cells[c]
            .iter()
            .flat_map(|of| {
                let f = &self.faces[of.face];
                (0..f.len()).map(move |i| {
                    let (a, b) = (f[i], f[(i + 1) % f.len()]);
                    (a.min(b), a.max(b))
                })
            })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    pub fn bounding_box(&self) -> (Point3, Point3) {
        let mut lo = Point3::repeat(f64::INFINITY);
        let mut hi = Point3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    /// Area, centroid, unit normal and diameter of a face by fan
    /// triangulation about the vertex average.
    pub fn face_geometry(&self, f: usize) -> Result<FaceGeometry> {
        let loop_ = &self.faces[f];
        let pts: Vec<Point3> = loop_.iter().map(|&v| self.vertices[v]).collect();
        polygon_geometry(&pts).map_err(|msg| Error::Invariant(format!("face {f}: {msg}")))
    }

    /// Volume (divergence theorem), centroid and diameter of a cell.
    pub fn cell_geometry(&self, c: usize) -> Result<CellGeometry> {
        let verts = self.cell_vertices(c);
        let anchor = verts.iter().map(|&v| self.vertices[v]).sum::<Point3>() / verts.len() as f64;
        let mut volume = 0.0;
        let mut moment = Point3::zeros();
        for of in &self.cells[c] {
            let f = &self.faces[of.face];
            let fc = f.iter().map(|&v| self.vertices[v]).sum::<Point3>() / f.len() as f64;
            for i in 0..f.len() {
                let (a, b) = (self.vertices[f[i]], self.vertices[f[(i + 1) % f.len()]]);
                let vol = of.sign() * (a - fc).cross(&(b - fc)).dot(&(fc - anchor)) / 6.0;
                volume += vol;
                moment += vol * (anchor + fc + a + b) / 4.0;
            }
        }
        if !(volume > 0.0) {
            return Err(Error::Invariant(format!(
                "cell {c} has nonpositive volume {volume:e}"
            )));
        }
        let mut diameter: f64 = 0.0;
        for (i, &a) in verts.iter().enumerate() {
            for &b in &verts[i + 1..] {
                diameter = diameter.max((self.vertices[a] - self.vertices[b]).norm());
            }
        }
        Ok(CellGeometry {
            volume,
            centroid: moment / volume,
            diameter,
        })
    }

    /// Returns a copy where every face is stored outward for the
    /// lowest-indexed incident cell.
    pub fn canonicalized(&self) -> PolyMesh {
        let mut mesh = self.clone();
        for f in 0..mesh.faces.len() {
            let owner = mesh.face_cells[f][0];
            if !orientation_in(&mesh.cells[owner], f) {
                mesh.faces[f].reverse();
                for &c in &mesh.face_cells[f] {
                    for of in mesh.cells[c].iter_mut().filter(|of| of.face == f) {
                        of.outward = !of.outward;
                    }
                }
            }
        }
        mesh
    }

    /// Uniformly rescaled copy (about the origin).
    pub fn scaled(&self, s: f64) -> PolyMesh {
        let mut mesh = self.clone();
        mesh.vertices.iter_mut().for_each(|v| *v *= s);
        mesh
    }

    fn check_duplicate_vertices(&self) -> Result<()> {
        let (lo, hi) = self.bounding_box();
        let tol = 1e-12 * (hi - lo).norm().max(f64::MIN_POSITIVE);
        let key = |p: &Point3| -> [i64; 3] {
            [
                ((p.x - lo.x) / tol / 4.0).floor() as i64,
                ((p.y - lo.y) / tol / 4.0).floor() as i64,
                ((p.z - lo.z) / tol / 4.0).floor() as i64,
            ]
        };
        let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for (i, p) in self.vertices.iter().enumerate() {
            let k = key(p);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        if let Some(list) = grid.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                            if let Some(&j) =
                                list.iter().find(|&&j| (self.vertices[j] - p).norm() <= tol)
                            {
                                return Err(Error::Conformity(format!(
                                    "vertices {j} and {i} coincide"
                                )));
                            }
                        }
                    }
                }
            }
            grid.entry(k).or_default().push(i);
        }
        Ok(())
    }

    fn check_simple(&self, f: usize) -> Result<()> {
        let g = self.face_geometry(f)?;
        let (e1, e2) = plane_basis(&g.normal);
        let pts: Vec<[f64; 2]> = self.faces[f]
            .iter()
            .map(|&v| {
                let d = self.vertices[v] - g.centroid;
                [d.dot(&e1), d.dot(&e2)]
            })
            .collect();
        let k = pts.len();
        let scale = g.diameter;
        for i in 0..k {
            for j in i + 1..k {
                if j == i + 1 || (i == 0 && j == k - 1) {
                    continue;
                }
                if segments_touch(
                    pts[i],
                    pts[(i + 1) % k],
                    pts[j],
                    pts[(j + 1) % k],
                    1e-12 * scale,
                ) {
                    return Err(Error::Invariant(format!("face {f} is self-intersecting")));
                }
            }
        }
        Ok(())
    }

    fn check_closed(&self, c: usize) -> Result<()> {
        let mut directed: HashMap<(usize, usize), i32> = HashMap::new();
        for of in &self.cells[c] {
            let f = &self.faces[of.face];
            for i in 0..f.len() {
                let (mut a, mut b) = (f[i], f[(i + 1) % f.len()]);
                if !of.outward {
                    std::mem::swap(&mut a, &mut b);
                }
                *directed.entry((a, b)).or_insert(0) += 1;
            }
        }
        for (&(a, b), &count) in &directed {
            if count != 1 || directed.get(&(b, a)) != Some(&1) {
                return Err(Error::Invariant(format!(
                    "cell {c} is not a closed consistently oriented surface at edge ({a}, {b})"
                )));
            }
        }
        Ok(())
    }
}

fn orientation_in(cell: &[OrientedFace], f: usize) -> bool {
    cell.iter()
        .find(|of| of.face == f)
        .map(|of| of.outward)
        .unwrap_or(true)
}

/// Orthonormal in-plane basis `(e1, e2)` with `e1 × e2 = n`.
pub fn plane_basis(n: &Point3) -> (Point3, Point3) {
    let a = if n.x.abs() < 0.9 {
        Point3::x()
    } else {
        Point3::y()
    };
    let e1 = (a - n * n.dot(&a)).normalize();
    let e2 = n.cross(&e1);
    (e1, e2)
}

pub(crate) fn polygon_geometry(pts: &[Point3]) -> std::result::Result<FaceGeometry, String> {
    let k = pts.len();
    let center = pts.iter().sum::<Point3>() / k as f64;
    let mut area_vec = Point3::zeros();
    let mut moment = Point3::zeros();
    let mut tri = Vec::with_capacity(k);
    for i in 0..k {
        let (a, b) = (pts[i], pts[(i + 1) % k]);
        let av = 0.5 * (a - center).cross(&(b - center));
        area_vec += av;
        tri.push((av, (center + a + b) / 3.0));
    }
    let area = area_vec.norm();
    let mut diameter: f64 = 0.0;
    for i in 0..k {
        for j in i + 1..k {
            diameter = diameter.max((pts[i] - pts[j]).norm());
        }
    }
    if !(area > 1e-14 * diameter * diameter) || area == 0.0 {
        return Err("degenerate polygon with zero area".into());
    }
    let normal = area_vec / area;
    for (av, c) in &tri {
        moment += av.dot(&normal) * c;
    }
    let centroid = moment / area;
    let off = pts
        .iter()
        .map(|p| (p - center).dot(&normal).abs())
        .fold(0.0, f64::max);
    if off > PLANARITY_TOL * diameter {
        return Err(format!("nonplanar polygon (offset {off:e})"));
    }
    Ok(FaceGeometry {
        area,
        centroid,
        normal,
        diameter,
    })
}

fn segments_touch(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2], eps: f64) -> bool {
    let orient = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| {
        (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    };
    let on_seg = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| {
        c[0] >= a[0].min(b[0]) - eps
            && c[0] <= a[0].max(b[0]) + eps
            && c[1] >= a[1].min(b[1]) - eps
            && c[1] <= a[1].max(b[1]) + eps
    };
    let scale = eps.max(f64::MIN_POSITIVE);
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    let tol = scale * scale.sqrt().max(1e-300);
    if ((d1 > tol && d2 < -tol) || (d1 < -tol && d2 > tol))
        && ((d3 > tol && d4 < -tol) || (d3 < -tol && d4 > tol))
    {
        return true;
    }
    (d1.abs() <= tol && on_seg(q1, q2, p1))
        || (d2.abs() <= tol && on_seg(q1, q2, p2))
        || (d3.abs() <= tol && on_seg(p1, p2, q1))
        || (d4.abs() <= tol && on_seg(p1, p2, q2))
}
