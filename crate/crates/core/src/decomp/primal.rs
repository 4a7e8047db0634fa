use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mesh::PolyMesh;
use crate::vem::face_projector;

use super::InterfaceIndex;

/// Which continuity conditions are enforced in the primal space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    V,
    E,
    F,
    VE,
    VF,
    EF,
    VEF,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::V,
        Variant::E,
        Variant::F,
        Variant::VE,
        Variant::VF,
        Variant::EF,
        Variant::VEF,
    ];

    pub fn vertices(self) -> bool {
        matches!(self, Variant::V | Variant::VE | Variant::VF | Variant::VEF)
    }

    pub fn edges(self) -> bool {
        matches!(self, Variant::E | Variant::VE | Variant::EF | Variant::VEF)
    }

    pub fn faces(self) -> bool {
        matches!(self, Variant::F | Variant::VF | Variant::EF | Variant::VEF)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::V => "V",
            Variant::E => "E",
            Variant::F => "F",
            Variant::VE => "VE",
            Variant::VF => "VF",
            Variant::EF => "EF",
            Variant::VEF => "VEF",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                Error::Usage(format!(
                    "unknown variant `{s}` (want V, E, F, VE, VF, EF or VEF)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    Vertex(usize),
    EdgeAverage(usize),
    FaceAverage(usize),
}

/// One primal continuity condition, shared by all of its owners.
#[derive(Debug, Clone)]
pub struct PrimalConstraint {
    pub kind: ConstraintKind,
    /// Subdomains sharing the constraint, sorted.
    pub owners: Vec<usize>,
    /// The functional over the closed edge/face, `(vertex, weight)`;
    /// weights sum to 1.
    pub weights: Vec<(usize, f64)>,
    /// The functional restricted to the open edge/face nodes and
    /// renormalized. This is what the change of basis makes primal.
    pub restricted: Vec<(usize, f64)>,
    /// Node whose coordinate is replaced by the functional value.
    pub designated: usize,
}

#[derive(Debug, Clone)]
pub struct PrimalSpec {
    pub variant: Variant,
    /// Cross points first, then edges, then faces, each in registry order.
    /// The position in this list is the global primal index.
    pub constraints: Vec<PrimalConstraint>,
}

impl PrimalSpec {
    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    /// Count per kind: `(vertices, edges, faces)`.
    pub fn counts(&self) -> (usize, usize, usize) {
        let mut c = (0, 0, 0);
        for k in &self.constraints {
            match k.kind {
                ConstraintKind::Vertex(_) => c.0 += 1,
                ConstraintKind::EdgeAverage(_) => c.1 += 1,
                ConstraintKind::FaceAverage(_) => c.2 += 1,
            }
        }
        c
    }
}

/// Largest weight wins; near-ties go to the lowest vertex index.
fn designate(restricted: &[(usize, f64)]) -> usize {
    let wmax = restricted.iter().map(|(_, w)| w.abs()).fold(0.0, f64::max);
    restricted
        .iter()
        .filter(|(_, w)| w.abs() >= wmax * (1.0 - 1e-12))
        .map(|&(v, _)| v)
        .min()
        .expect("nonempty functional")
}

fn restrict(weights: &[(usize, f64)], open: &[usize], what: &str) -> Result<Vec<(usize, f64)>> {
    let r: Vec<(usize, f64)> = weights
        .iter()
        .copied()
        .filter(|(v, _)| open.binary_search(v).is_ok())
        .collect();
    let s: f64 = r.iter().map(|(_, w)| w).sum();
    if r.is_empty() || !(s.abs() > 0.0) {
        return Err(Error::Unsupported(format!(
            "{what} has no interior node to carry its average"
        )));
    }
    Ok(r.into_iter().map(|(v, w)| (v, w / s)).collect())
}

/// Trapezoid weights of `|E|⁻¹∫_E w` for nodes at sorted parameters `t`.
fn trapezoid(closure: &[(usize, f64)]) -> Vec<(usize, f64)> {
    let m = closure.len();
    let len = closure[m - 1].1 - closure[0].1;
    (0..m)
        .map(|k| {
            let left = if k > 0 {
                closure[k].1 - closure[k - 1].1
            } else {
                0.0
            };
            let right = if k + 1 < m {
                closure[k + 1].1 - closure[k].1
            } else {
                0.0
            };
            (closure[k].0, 0.5 * (left + right) / len)
        })
        .collect()
}

/// Face-average functional `|F|⁻¹ Σ_f ∫_f Π w` over the mesh faces of `F`.
fn face_functional(mesh: &PolyMesh, mesh_faces: &[usize]) -> Result<Vec<(usize, f64)>> {
    let mut acc: Vec<(usize, f64)> = Vec::new();
    let mut total = 0.0;
    for &f in mesh_faces {
        let p = face_projector(mesh, f)?;
        total += p.area;
        for (&v, &w) in p.vertices.iter().zip(p.average_weights()) {
            acc.push((v, p.area * w));
        }
    }
    acc.sort_by_key(|&(v, _)| v);
    let mut out: Vec<(usize, f64)> = Vec::new();
    for (v, w) in acc {
        match out.last_mut() {
            Some((u, s)) if *u == v => *s += w,
            _ => out.push((v, w)),
        }
    }
    for (_, w) in &mut out {
        *w /= total;
    }
    Ok(out)
}

/// Primal constraints of a variant: cross-point values, edge averages
/// and/or face averages, each shared by every adjacent subdomain.
pub fn primal_constraints(
    mesh: &PolyMesh,
    index: &InterfaceIndex,
    variant: Variant,
) -> Result<PrimalSpec> {
    let mut constraints = Vec::new();
    if variant.vertices() {
        for (id, cp) in index.cross_points.iter().enumerate() {
            constraints.push(PrimalConstraint {
                kind: ConstraintKind::Vertex(id),
                owners: cp.subdomains.clone(),
                weights: vec![(cp.vertex, 1.0)],
                restricted: vec![(cp.vertex, 1.0)],
                designated: cp.vertex,
            });
        }
    }
    if variant.edges() {
        for (id, e) in index.edges.iter().enumerate() {
            let weights = trapezoid(&e.closure);
            let mut open = e.nodes.clone();
            open.sort_unstable();
            let restricted = restrict(&weights, &open, &format!("macro edge {id}"))?;
            constraints.push(PrimalConstraint {
                kind: ConstraintKind::EdgeAverage(id),
                owners: e.subdomains.clone(),
                designated: designate(&restricted),
                weights,
                restricted,
            });
        }
    }
    if variant.faces() {
        for (id, f) in index.faces.iter().enumerate() {
            let weights = face_functional(mesh, &f.mesh_faces)?;
            let restricted = restrict(&weights, &f.nodes, &format!("macro face {id}"))?;
            constraints.push(PrimalConstraint {
                kind: ConstraintKind::FaceAverage(id),
                owners: f.subdomains.to_vec(),
                designated: designate(&restricted),
                weights,
                restricted,
            });
        }
    }
    if constraints.is_empty() {
        return Err(Error::Usage(format!(
            "variant {variant} has no primal constraints with {} subdomain(s) per axis",
            index.n
        )));
    }
    Ok(PrimalSpec {
        variant,
        constraints,
    })
}
