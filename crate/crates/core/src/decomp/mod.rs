//! Box decomposition of a mesh into `N³` subdomains, interface
//! classification, primal constraint selection, coefficient scaling and
//! the redundant jump operator.

mod jump;
mod primal;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mesh::{Point3, PolyMesh};

pub use jump::{build_jump, scaling_coefficients, JumpOperator, Scaling};
pub use primal::{primal_constraints, ConstraintKind, PrimalConstraint, PrimalSpec, Variant};

/// Geometric tolerance for lattice-plane tests, relative to the unit cube.
const PLANE_TOL: f64 = 1e-9;

/// Coefficient distribution over the subdomains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RhoSpec {
    Const(f64),
    /// `(ρ₁, ρ₂)`: with subdomains counted from 1 along each axis, `ρ₁`
    /// goes where `i + j + k` is even. For odd `N` the centre subdomain
    /// is then a `ρ₁` one.
    Checkerboard(f64, f64),
}

impl RhoSpec {
    pub fn value(&self, ijk: [usize; 3]) -> f64 {
        match *self {
            RhoSpec::Const(r) => r,
            RhoSpec::Checkerboard(r1, r2) => {
                // Zero-based indices, so the parity is flipped.
                if (ijk[0] + ijk[1] + ijk[2]) % 2 == 1 {
                    r1
                } else {
                    r2
                }
            }
        }
    }
}

impl FromStr for RhoSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::Usage(format!(
                "bad coefficient spec `{s}` (want const:V or checkerboard:R1,R2)"
            ))
        };
        let num = |t: &str| -> Result<f64> {
            let v: f64 = t.trim().parse().map_err(|_| bad())?;
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Usage(format!("coefficient {v} must be positive")))
            }
        };
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        match kind.trim() {
            "const" => Ok(RhoSpec::Const(num(rest)?)),
            "checkerboard" => {
                let (a, b) = rest.split_once(',').ok_or_else(bad)?;
                Ok(RhoSpec::Checkerboard(num(a)?, num(b)?))
            }
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for RhoSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RhoSpec::Const(r) => write!(f, "const:{r}"),
            RhoSpec::Checkerboard(a, b) => write!(f, "checkerboard:{a},{b}"),
        }
    }
}

/// Assignment of cells to the boxes of an `N × N × N` lattice.
#[derive(Debug, Clone)]
pub struct Partition {
    pub n: usize,
    pub cell_subdomain: Vec<usize>,
    pub subdomain_cells: Vec<Vec<usize>>,
    /// Sorted vertices touched by each subdomain's cells.
    pub subdomain_vertices: Vec<Vec<usize>>,
    /// Subdomains whose cells contain each vertex (`N_i`), sorted.
    pub vertex_subdomains: Vec<Vec<usize>>,
    /// One coefficient per subdomain.
    pub rho: Vec<f64>,
}

impl Partition {
    pub fn num_subdomains(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn index(&self, ijk: [usize; 3]) -> usize {
        ijk[0] + self.n * (ijk[1] + self.n * ijk[2])
    }

    pub fn coords(&self, l: usize) -> [usize; 3] {
        [l % self.n, (l / self.n) % self.n, l / (self.n * self.n)]
    }

    /// Lower and upper corners of subdomain `l`.
    pub fn subdomain_box(&self, l: usize) -> (Point3, Point3) {
        let h = 1.0 / self.n as f64;
        let c = self.coords(l);
        let lo = Point3::new(c[0] as f64 * h, c[1] as f64 * h, c[2] as f64 * h);
        (lo, lo + Point3::repeat(h))
    }

    /// Coefficient of each cell.
    pub fn cell_rho(&self) -> Vec<f64> {
        self.cell_subdomain.iter().map(|&l| self.rho[l]).collect()
    }

    pub fn with_rho(mut self, spec: RhoSpec) -> Self {
        self.rho = (0..self.num_subdomains())
            .map(|l| spec.value(self.coords(l)))
            .collect();
        self
    }
}

/// Splits the mesh into `n³` boxes of side `1/n` by cell centroid.
///
/// Every vertex of a cell must lie in the closed box of its centroid.
pub fn partition_box(mesh: &PolyMesh, n: usize) -> Result<Partition> {
    if n == 0 {
        return Err(Error::Usage(
            "number of subdomains per axis must be at least 1".into(),
        ));
    }
    let nf = n as f64;
    let mut cell_subdomain = Vec::with_capacity(mesh.num_cells());
    let mut subdomain_cells = vec![Vec::new(); n * n * n];
    let mut vertex_subdomains: Vec<Vec<usize>> = vec![Vec::new(); mesh.num_vertices()];
    for c in 0..mesh.num_cells() {
        let x = mesh.cell_geometry(c)?.centroid;
        let mut ijk = [0usize; 3];
        for a in 0..3 {
            ijk[a] = ((x[a] * nf).floor().max(0.0) as usize).min(n - 1);
        }
        let l = ijk[0] + n * (ijk[1] + n * ijk[2]);
        let verts = mesh.cell_vertices(c);
        for &v in &verts {
            let p = mesh.vertex(v);
            for a in 0..3 {
                let lo = ijk[a] as f64 / nf;
                let hi = (ijk[a] + 1) as f64 / nf;
                if p[a] < lo - PLANE_TOL || p[a] > hi + PLANE_TOL {
                    return Err(Error::Conformity(format!(
                        "cell {c} straddles the boundary of subdomain {l} (vertex {v})"
                    )));
                }
            }
            if !vertex_subdomains[v].contains(&l) {
                vertex_subdomains[v].push(l);
            }
        }
        cell_subdomain.push(l);
        subdomain_cells[l].push(c);
    }
    for s in &mut vertex_subdomains {
        s.sort_unstable();
    }
    let mut subdomain_vertices = vec![Vec::new(); n * n * n];
    for (v, subs) in vertex_subdomains.iter().enumerate() {
        for &l in subs {
            subdomain_vertices[l].push(v);
        }
    }
    if let Some(l) = subdomain_cells.iter().position(|c| c.is_empty()) {
        return Err(Error::Conformity(format!(
            "subdomain {l} contains no cells"
        )));
    }
    Ok(Partition {
        n,
        cell_subdomain,
        subdomain_cells,
        subdomain_vertices,
        vertex_subdomains,
        rho: vec![1.0; n * n * n],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeClass {
    CrossPoint(usize),
    Edge(usize),
    Face(usize),
}

/// Subdomain vertex interior to Ω.
#[derive(Debug, Clone)]
pub struct CrossPoint {
    pub vertex: usize,
    pub subdomains: Vec<usize>,
}

/// Open segment of a lattice line shared by four subdomains.
#[derive(Debug, Clone)]
pub struct MacroEdge {
    /// Direction of the edge.
    pub axis: usize,
    pub subdomains: Vec<usize>,
    /// Nodes strictly inside the edge, sorted by position along it.
    pub nodes: Vec<usize>,
    /// Nodes of the closed edge (including its two endpoints), sorted by
    /// position, with their parameter along the edge.
    pub closure: Vec<(usize, f64)>,
}

/// Open square of a lattice plane shared by two subdomains.
#[derive(Debug, Clone)]
pub struct MacroFace {
    /// Normal direction.
    pub axis: usize,
    pub subdomains: [usize; 2],
    /// Mesh faces tiling the macro face.
    pub mesh_faces: Vec<usize>,
    /// Nodes strictly inside the face, sorted.
    pub nodes: Vec<usize>,
    /// Every vertex of `mesh_faces`, sorted.
    pub closure: Vec<usize>,
}

/// Classification of the interface nodes of a partition.
#[derive(Debug, Clone)]
pub struct InterfaceIndex {
    pub n: usize,
    /// `N_i` for every vertex (copied from the partition).
    pub vertex_subdomains: Vec<Vec<usize>>,
    /// Interface nodes, sorted.
    pub interface: Vec<usize>,
    /// Class of every vertex; `None` off the interface.
    pub class: Vec<Option<NodeClass>>,
    pub cross_points: Vec<CrossPoint>,
    pub edges: Vec<MacroEdge>,
    pub faces: Vec<MacroFace>,
}

impl InterfaceIndex {
    /// Interface nodes of one subdomain, sorted.
    pub fn subdomain_interface(&self, l: usize) -> Vec<usize> {
        self.interface
            .iter()
            .copied()
            .filter(|&v| self.vertex_subdomains[v].binary_search(&l).is_ok())
            .collect()
    }
}

/// Lattice planes crossed by a point: `Some(level)` per axis when the
/// coordinate sits on an interior plane, plus whether it lies on ∂Ω.
fn lattice_position(p: &Point3, n: usize) -> ([Option<usize>; 3], bool) {
    let nf = n as f64;
    let mut planes = [None; 3];
    let mut on_boundary = false;
    for a in 0..3 {
        let t = p[a] * nf;
        let r = t.round();
        if (t - r).abs() <= PLANE_TOL * nf {
            if r <= 0.0 || r >= nf {
                on_boundary = true;
            } else {
                planes[a] = Some(r as usize);
            }
        }
    }
    (planes, on_boundary)
}

fn edge_id(n: usize, axis: usize, la: usize, lb: usize, seg: usize) -> usize {
    ((axis * (n - 1) + (la - 1)) * (n - 1) + (lb - 1)) * n + seg
}

fn face_id(n: usize, axis: usize, level: usize, sb: usize, sc: usize) -> usize {
    ((axis * (n - 1) + (level - 1)) * n + sb) * n + sc
}

fn cross_id(n: usize, l: [usize; 3]) -> usize {
    (l[0] - 1) + (n - 1) * ((l[1] - 1) + (n - 1) * (l[2] - 1))
}

fn others(axis: usize) -> (usize, usize) {
    match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

/// Splits the interface into cross points, macro-edge nodes and macro-face
/// nodes, checking each node's subdomain set against its position.
pub fn classify_interface(mesh: &PolyMesh, part: &Partition) -> Result<InterfaceIndex> {
    let n = part.n;
    let nf = n as f64;
    let box_of = |t: f64| ((t * nf).floor().max(0.0) as usize).min(n - 1);
    let mut class = vec![None; mesh.num_vertices()];
    let mut interface = Vec::new();
    let ncross = (n - 1).pow(3);
    let mut cross_points: Vec<Option<CrossPoint>> = vec![None; ncross];
    let nedges = 3 * n * (n - 1) * (n - 1);
    let mut edge_nodes: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nedges];
    let nfaces = 3 * (n - 1) * n * n;
    let mut face_nodes: Vec<Vec<usize>> = vec![Vec::new(); nfaces];

    for v in 0..mesh.num_vertices() {
        let p = mesh.vertex(v);
        let (planes, on_boundary) = lattice_position(&p, n);
        let nsub = &part.vertex_subdomains[v];
        if on_boundary || mesh.is_boundary_vertex(v) {
            continue;
        }
        let count = planes.iter().filter(|l| l.is_some()).count();
        if count == 0 {
            if nsub.len() != 1 {
                return Err(Error::Conformity(format!(
                    "vertex {v} lies inside a subdomain but touches {} subdomains",
                    nsub.len()
                )));
            }
            continue;
        }
        // Expected subdomain set from the geometry.
        let mut expect = vec![[0usize; 3]];
        for a in 0..3 {
            match planes[a] {
                Some(l) => {
                    expect = expect
                        .into_iter()
                        .flat_map(|ijk| {
                            let (mut lo, mut hi) = (ijk, ijk);
                            lo[a] = l - 1;
                            hi[a] = l;
                            [lo, hi]
                        })
                        .collect();
                }
                None => {
                    for ijk in &mut expect {
                        ijk[a] = box_of(p[a]);
                    }
                }
            }
        }
        let mut expect: Vec<usize> = expect.iter().map(|&ijk| part.index(ijk)).collect();
        expect.sort_unstable();
        if &expect != nsub {
            return Err(Error::Conformity(format!(
                "vertex {v} at {:?} belongs to subdomains {:?}, expected {:?}",
                p.as_slice(),
                nsub,
                expect
            )));
        }
        interface.push(v);
        match count {
            3 => {
                let id = cross_id(
                    n,
                    [planes[0].unwrap(), planes[1].unwrap(), planes[2].unwrap()],
                );
                cross_points[id] = Some(CrossPoint {
                    vertex: v,
                    subdomains: nsub.clone(),
                });
                class[v] = Some(NodeClass::CrossPoint(id));
            }
            2 => {
                let axis = (0..3).find(|&a| planes[a].is_none()).unwrap();
                let (a, b) = others(axis);
                let id = edge_id(
                    n,
                    axis,
                    planes[a].unwrap(),
                    planes[b].unwrap(),
                    box_of(p[axis]),
                );
                edge_nodes[id].push((v, p[axis]));
                class[v] = Some(NodeClass::Edge(id));
            }
            _ => {
                let axis = (0..3).find(|&a| planes[a].is_some()).unwrap();
                let (b, c) = others(axis);
                let id = face_id(n, axis, planes[axis].unwrap(), box_of(p[b]), box_of(p[c]));
                face_nodes[id].push(v);
                class[v] = Some(NodeClass::Face(id));
            }
        }
    }

    let cross_points: Vec<CrossPoint> = cross_points
        .into_iter()
        .enumerate()
        .map(|(id, c)| {
            c.ok_or_else(|| Error::Conformity(format!("no mesh vertex at subdomain corner {id}")))
        })
        .collect::<Result<_>>()?;

    // Endpoint lookup by exact lattice position.
    let mut corner_vertex: HashMap<[usize; 3], usize> = HashMap::new();
    for v in 0..mesh.num_vertices() {
        let p = mesh.vertex(v);
        let mut key = [0usize; 3];
        let mut on_lattice = true;
        for a in 0..3 {
            let t = p[a] * nf;
            let r = t.round();
            on_lattice &= (t - r).abs() <= PLANE_TOL * nf;
            key[a] = r.max(0.0) as usize;
        }
        if on_lattice {
            corner_vertex.insert(key, v);
        }
    }

    let mut edges = Vec::with_capacity(nedges);
    for axis in 0..3 {
        let (a, b) = others(axis);
        for la in 1..n {
            for lb in 1..n {
                for seg in 0..n {
                    let id = edge_id(n, axis, la, lb, seg);
                    debug_assert_eq!(id, edges.len());
                    let mut nodes = std::mem::take(&mut edge_nodes[id]);
                    nodes.sort_by(|x, y| x.1.partial_cmp(&y.1).expect("finite"));
                    let mut ends = Vec::with_capacity(2);
                    for s in [seg, seg + 1] {
                        let mut key = [0usize; 3];
                        key[axis] = s;
                        key[a] = la;
                        key[b] = lb;
                        let v = *corner_vertex.get(&key).ok_or_else(|| {
                            Error::Conformity(format!(
                                "macro edge {id} has no mesh vertex at its end"
                            ))
                        })?;
                        ends.push((v, s as f64 / nf));
                    }
                    let mut closure = vec![ends[0]];
                    closure.extend(nodes.iter().copied());
                    closure.push(ends[1]);
                    let mut subdomains = Vec::with_capacity(4);
                    for ia in [la - 1, la] {
                        for ib in [lb - 1, lb] {
                            let mut ijk = [0; 3];
                            ijk[axis] = seg;
                            ijk[a] = ia;
                            ijk[b] = ib;
                            subdomains.push(part.index(ijk));
                        }
                    }
                    subdomains.sort_unstable();
                    edges.push(MacroEdge {
                        axis,
                        subdomains,
                        nodes: nodes.into_iter().map(|(v, _)| v).collect(),
                        closure,
                    });
                }
            }
        }
    }

    let mut faces: Vec<MacroFace> = Vec::with_capacity(nfaces);
    for axis in 0..3 {
        let (b, c) = others(axis);
        for level in 1..n {
            for sb in 0..n {
                for sc in 0..n {
                    let id = face_id(n, axis, level, sb, sc);
                    debug_assert_eq!(id, faces.len());
                    let mut lo = [0; 3];
                    lo[axis] = level - 1;
                    lo[b] = sb;
                    lo[c] = sc;
                    let mut hi = lo;
                    hi[axis] = level;
                    let mut nodes = std::mem::take(&mut face_nodes[id]);
                    nodes.sort_unstable();
                    faces.push(MacroFace {
                        axis,
                        subdomains: [part.index(lo), part.index(hi)],
                        mesh_faces: Vec::new(),
                        nodes,
                        closure: Vec::new(),
                    });
                }
            }
        }
    }
    for f in 0..mesh.num_faces() {
        let cells = mesh.face_cells(f);
        if cells.len() != 2 {
            continue;
        }
        let (l0, l1) = (part.cell_subdomain[cells[0]], part.cell_subdomain[cells[1]]);
        if l0 == l1 {
            continue;
        }
        let (c0, c1) = (part.coords(l0), part.coords(l1));
        let diff: Vec<usize> = (0..3).filter(|&a| c0[a] != c1[a]).collect();
        if diff.len() != 1 || c0[diff[0]].abs_diff(c1[diff[0]]) != 1 {
            return Err(Error::Conformity(format!(
                "mesh face {f} joins subdomains {l0} and {l1} that share no macro face"
            )));
        }
        let axis = diff[0];
        let (b, c) = others(axis);
        let id = face_id(n, axis, c0[axis].max(c1[axis]), c0[b], c0[c]);
        faces[id].mesh_faces.push(f);
    }
    for face in &mut faces {
        let mut closure: Vec<usize> = face
            .mesh_faces
            .iter()
            .flat_map(|&f| mesh.face(f).iter().copied())
            .collect();
        closure.sort_unstable();
        closure.dedup();
        face.closure = closure;
    }

    Ok(InterfaceIndex {
        n,
        vertex_subdomains: part.vertex_subdomains.clone(),
        interface,
        class,
        cross_points,
        edges,
        faces,
    })
}
