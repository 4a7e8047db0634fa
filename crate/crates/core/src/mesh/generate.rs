//! Structured mesh generators for the unit cube.

use std::collections::{BTreeMap, HashMap};

use super::{OrientedFace, Point3, PolyMesh};

/// `n³` axis-aligned hexahedra.
///
/// # Panics
/// If `n == 0`.
pub fn generate_cube_grid(n: usize) -> PolyMesh {
    assert!(n >= 1, "cube grid needs n >= 1");
    let m = n + 1;
    let h = 1.0 / n as f64;
    let vid = |i: usize, j: usize, k: usize| i + m * (j + m * k);
    let cid = |i: usize, j: usize, k: usize| i + n * (j + n * k);
    let mut vertices = Vec::with_capacity(m * m * m);
    for k in 0..m {
        for j in 0..m {
            for i in 0..m {
                vertices.push(Point3::new(i as f64 * h, j as f64 * h, k as f64 * h));
            }
        }
    }
    let mut faces = Vec::new();
    let mut cells: Vec<Vec<OrientedFace>> = vec![Vec::with_capacity(6); n * n * n];
    // Faces are created with normal along +axis; the cell below (in that
    // axis) sees it outward, the cell above sees it inward.
    for axis in 0..3 {
        for a in 0..=n {
            for b in 0..n {
                for c in 0..n {
                    let (ijk, loop_): ([usize; 3], [usize; 4]) = match axis {
                        0 => (
                            [a, b, c],
                            [
                                vid(a, b, c),
                                vid(a, b + 1, c),
                                vid(a, b + 1, c + 1),
                                vid(a, b, c + 1),
                            ],
                        ),
                        1 => (
                            [c, a, b],
                            [
                                vid(c, a, b),
                                vid(c, a, b + 1),
                                vid(c + 1, a, b + 1),
                                vid(c + 1, a, b),
                            ],
                        ),
                        _ => (
                            [b, c, a],
                            [
                                vid(b, c, a),
                                vid(b + 1, c, a),
                                vid(b + 1, c + 1, a),
                                vid(b, c + 1, a),
                            ],
                        ),
                    };
                    let f = faces.len();
                    faces.push(loop_.to_vec());
                    if a > 0 {
                        let mut lo = ijk;
                        lo[axis] -= 1;
                        cells[cid(lo[0], lo[1], lo[2])].push(OrientedFace {
                            face: f,
                            outward: true,
                        });
                    }
                    if a < n {
                        cells[cid(ijk[0], ijk[1], ijk[2])].push(OrientedFace {
                            face: f,
                            outward: false,
                        });
                    }
                }
            }
        }
    }
    PolyMesh::new(vertices, faces, cells)
        .expect("cube grid is valid")
        .canonicalized()
}

// Octahedra are built in integer lattice units: one unit is a quarter of the
// BCC period, so the cube is [0, 8n]^3, corner sites sit at multiples of 4
// and body-centre sites at 4i+2. Vertices are snapped to 1/12 of a unit.
const SNAP: f64 = 12.0;
const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Plane {
    /// Bisector with another site.
    Site(usize),
    /// Cube boundary, `2 * axis + (0 low | 1 high)`.
    Wall(usize),
    /// Provisional bounding box; must not survive clipping.
    Bound,
}

#[derive(Debug, Clone)]
struct ClipFace {
    plane: Plane,
    pts: Vec<Point3>,
}

/// Truncated-octahedron tessellation of the unit cube.
///
/// Voronoi cells of the body-centred cubic lattice with period `1/(2n)`,
/// taking only the sites strictly inside the cube and clipping the cells
/// to it. Interior cells are regular truncated octahedra; cells along the
/// boundary are the clipped remainders.
///
/// # Panics
/// If `n == 0`.
pub fn generate_truncated_octahedra(n: usize) -> PolyMesh {
    assert!(n >= 1, "octahedra mesh needs n >= 1");
    let side = 8 * n as i64;
    let mut sites: Vec<[i64; 3]> = Vec::new();
    for k in 0..=side {
        for j in 0..=side {
            for i in 0..=side {
                let p = [i, j, k];
                let inside = p.iter().all(|&c| c > 0 && c < side);
                let corner = p.iter().all(|&c| c % 4 == 0);
                let body = p.iter().all(|&c| c % 4 == 2);
                if inside && (corner || body) {
                    sites.push(p);
                }
            }
        }
    }
    let index: HashMap<[i64; 3], usize> = sites.iter().enumerate().map(|(i, &p)| (p, i)).collect();

    let mut cell_faces: Vec<Vec<(Plane, Vec<[i64; 3]>)>> = Vec::with_capacity(sites.len());
    for (s, &p) in sites.iter().enumerate() {
        let mut neigh: Vec<(i64, usize)> = Vec::new();
        for dz in -12..=12i64 {
            for dy in -12..=12i64 {
                for dx in -12..=12i64 {
                    if let Some(&q) = index.get(&[p[0] + dx, p[1] + dy, p[2] + dz]) {
                        if q != s {
                            neigh.push((dx * dx + dy * dy + dz * dz, q));
                        }
                    }
                }
            }
        }
        neigh.sort_unstable();
        let pf = to_point(p);
        let mut poly = initial_box(pf, side as f64);
        for &(_, q) in &neigh {
            let qf = to_point(sites[q]);
            let normal = qf - pf;
            let offset = 0.5 * (qf.norm_squared() - pf.norm_squared());
            clip(&mut poly, normal, offset, Plane::Site(q));
        }
        assert!(
            poly.iter().all(|f| f.plane != Plane::Bound),
            "bounding box of site {s} survived clipping"
        );
        cell_faces.push(
            poly.into_iter()
                .map(|f| (f.plane, f.pts.iter().map(snap).collect::<Vec<_>>()))
                .map(|(pl, mut keys)| {
                    keys.dedup();
                    while keys.len() > 1 && keys.first() == keys.last() {
                        keys.pop();
                    }
                    (pl, keys)
                })
                .filter(|(_, keys)| keys.len() >= 3)
                .collect(),
        );
    }

    // Global vertex set, numbered in (z, y, x) order.
    let mut vkeys: BTreeMap<[i64; 3], usize> = BTreeMap::new();
    for faces in &cell_faces {
        for (_, keys) in faces {
            for k in keys {
                vkeys.insert([k[2], k[1], k[0]], 0);
            }
        }
    }
    let mut vertices = Vec::with_capacity(vkeys.len());
    let scale = 1.0 / (SNAP * side as f64);
    for (i, (k, slot)) in vkeys.iter_mut().enumerate() {
        *slot = i;
        vertices.push(Point3::new(
            k[2] as f64 * scale,
            k[1] as f64 * scale,
            k[0] as f64 * scale,
        ));
    }
    let vid = |k: &[i64; 3]| vkeys[&[k[2], k[1], k[0]]];

    // Insert vertices that lie on an edge of a neighbouring loop so that
    // every shared edge is subdivided identically on both sides.
    let bucket = (4.0 * SNAP) as i64;
    let mut grid: HashMap<[i64; 3], Vec<[i64; 3]>> = HashMap::new();
    for k in vkeys.keys() {
        let k = [k[2], k[1], k[0]];
        grid.entry([k[0] / bucket, k[1] / bucket, k[2] / bucket])
            .or_default()
            .push(k);
    }
    for faces in &mut cell_faces {
        for (_, keys) in faces.iter_mut() {
            let mut out = Vec::with_capacity(keys.len());
            for i in 0..keys.len() {
                let (a, b) = (keys[i], keys[(i + 1) % keys.len()]);
                out.push(a);
                let mut on_edge = points_on_segment(&grid, bucket, a, b);
                on_edge.sort_unstable();
                out.extend(on_edge.into_iter().map(|(_, k)| k));
            }
            *keys = out;
        }
    }

    // Shared faces: the lower-indexed site owns the loop.
    let mut faces: Vec<Vec<usize>> = Vec::new();
    let mut cells: Vec<Vec<OrientedFace>> = vec![Vec::new(); sites.len()];
    let mut shared: HashMap<(usize, usize), usize> = HashMap::new();
    for (s, faces_s) in cell_faces.iter().enumerate() {
        for (plane, keys) in faces_s {
            let loop_: Vec<usize> = keys.iter().map(&vid).collect();
            match *plane {
                Plane::Site(q) if q < s => {
                    let f = *shared.get(&(q, s)).unwrap_or_else(|| {
                        panic!("face between sites {q} and {s} missing on one side")
                    });
                    let mut a = faces[f].clone();
                    let mut b = loop_;
                    a.sort_unstable();
                    b.sort_unstable();
                    assert_eq!(a, b, "face between sites {q} and {s} does not match");
                    cells[s].push(OrientedFace {
                        face: f,
                        outward: false,
                    });
                }
                Plane::Site(q) => {
                    shared.insert((s, q), faces.len());
                    cells[s].push(OrientedFace {
                        face: faces.len(),
                        outward: true,
                    });
                    faces.push(loop_);
                }
                _ => {
                    cells[s].push(OrientedFace {
                        face: faces.len(),
                        outward: true,
                    });
                    faces.push(loop_);
                }
            }
        }
    }
    PolyMesh::new(vertices, faces, cells).expect("octahedra mesh is valid")
}

fn to_point(p: [i64; 3]) -> Point3 {
    Point3::new(p[0] as f64, p[1] as f64, p[2] as f64)
}

fn snap(p: &Point3) -> [i64; 3] {
    let mut k = [0i64; 3];
    for a in 0..3 {
        let s = p[a] * SNAP;
        let r = s.round();
        assert!(
            (s - r).abs() < 1e-6,
            "vertex coordinate {} is off the snapping grid",
            p[a]
        );
        k[a] = r as i64;
    }
    k
}

/// Grid points strictly inside segment `a-b`, with their parameter along it.
fn points_on_segment(
    grid: &HashMap<[i64; 3], Vec<[i64; 3]>>,
    bucket: i64,
    a: [i64; 3],
    b: [i64; 3],
) -> Vec<(i64, [i64; 3])> {
    let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let len2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    let lo: Vec<i64> = (0..3).map(|i| a[i].min(b[i]) / bucket).collect();
    let hi: Vec<i64> = (0..3).map(|i| a[i].max(b[i]) / bucket).collect();
    let mut found = Vec::new();
    for gz in lo[2]..=hi[2] {
        for gy in lo[1]..=hi[1] {
            for gx in lo[0]..=hi[0] {
                let Some(list) = grid.get(&[gx, gy, gz]) else {
                    continue;
                };
                for &v in list {
                    let w = [v[0] - a[0], v[1] - a[1], v[2] - a[2]];
                    let cross = [
                        d[1] * w[2] - d[2] * w[1],
                        d[2] * w[0] - d[0] * w[2],
                        d[0] * w[1] - d[1] * w[0],
                    ];
                    if cross != [0, 0, 0] {
                        continue;
                    }
                    let t = d[0] * w[0] + d[1] * w[1] + d[2] * w[2];
                    if t > 0 && t < len2 {
                        found.push((t, v));
                    }
                }
            }
        }
    }
    found
}

fn initial_box(p: Point3, side: f64) -> Vec<ClipFace> {
    let lo = p.map(|c| (c - 6.0).max(0.0));
    let hi = p.map(|c| (c + 6.0).min(side));
    let corner = |x: bool, y: bool, z: bool| {
        Point3::new(
            if x { hi.x } else { lo.x },
            if y { hi.y } else { lo.y },
            if z { hi.z } else { lo.z },
        )
    };
    let tag = |axis: usize, high: bool| {
        let at_wall = if high {
            hi[axis] == side
        } else {
            lo[axis] == 0.0
        };
        if at_wall {
            Plane::Wall(2 * axis + high as usize)
        } else {
            Plane::Bound
        }
    };
    let (f, t) = (false, true);
    vec![
        ClipFace {
            plane: tag(0, f),
            pts: vec![
                corner(f, f, f),
                corner(f, f, t),
                corner(f, t, t),
                corner(f, t, f),
            ],
        },
        ClipFace {
            plane: tag(0, t),
            pts: vec![
                corner(t, f, f),
                corner(t, t, f),
                corner(t, t, t),
                corner(t, f, t),
            ],
        },
        ClipFace {
            plane: tag(1, f),
            pts: vec![
                corner(f, f, f),
                corner(t, f, f),
                corner(t, f, t),
                corner(f, f, t),
            ],
        },
        ClipFace {
            plane: tag(1, t),
            pts: vec![
                corner(f, t, f),
                corner(f, t, t),
                corner(t, t, t),
                corner(t, t, f),
            ],
        },
        ClipFace {
            plane: tag(2, f),
            pts: vec![
                corner(f, f, f),
                corner(f, t, f),
                corner(t, t, f),
                corner(t, f, f),
            ],
        },
        ClipFace {
            plane: tag(2, t),
            pts: vec![
                corner(f, f, t),
                corner(t, f, t),
                corner(t, t, t),
                corner(f, t, t),
            ],
        },
    ]
}

/// Intersects a convex polyhedron (outward-CCW face loops) with
/// `{x : normal·x ≤ offset}`.
fn clip(poly: &mut Vec<ClipFace>, normal: Point3, offset: f64, plane: Plane) {
    let scale = normal.norm();
    let dist = |x: &Point3| (normal.dot(x) - offset) / scale;
    let mut any_out = false;
    let mut all_out = true;
    for f in poly.iter() {
        for x in &f.pts {
            let d = dist(x);
            any_out |= d > EPS;
            all_out &= d >= -EPS;
        }
    }
    if !any_out {
        // A face lying on the cutting plane with the same orientation takes
        // its tag.
        let unit = normal / scale;
        for f in poly.iter_mut() {
            if f.pts.iter().all(|x| dist(x).abs() <= EPS) && face_normal(&f.pts).dot(&unit) > 0.0 {
                f.plane = plane;
            }
        }
        return;
    }
    assert!(!all_out, "clipping plane removes the whole cell");

    let mut cap: Vec<Point3> = Vec::new();
    let mut kept = Vec::with_capacity(poly.len() + 1);
    for f in poly.drain(..) {
        let k = f.pts.len();
        let d: Vec<f64> = f.pts.iter().map(dist).collect();
        let mut out = Vec::with_capacity(k + 1);
        for i in 0..k {
            let j = (i + 1) % k;
            let (a, b) = (f.pts[i], f.pts[j]);
            if d[i] <= EPS {
                out.push(a);
                if d[i] >= -EPS {
                    cap.push(a);
                }
            }
            if (d[i] < -EPS && d[j] > EPS) || (d[i] > EPS && d[j] < -EPS) {
                let t = d[i] / (d[i] - d[j]);
                let x = a + (b - a) * t;
                out.push(x);
                cap.push(x);
            }
        }
        out.dedup_by(|a, b| (*a - *b).norm() <= EPS);
        while out.len() > 1 && (out[0] - out[out.len() - 1]).norm() <= EPS {
            out.pop();
        }
        if out.len() >= 3 && !out.iter().all(|x| dist(x).abs() <= EPS) {
            kept.push(ClipFace {
                plane: f.plane,
                pts: out,
            });
        }
    }

    let mut uniq: Vec<Point3> = Vec::new();
    for x in cap {
        if !uniq.iter().any(|u| (u - x).norm() <= EPS) {
            uniq.push(x);
        }
    }
    if uniq.len() >= 3 {
        let unit = normal / scale;
        let c = uniq.iter().sum::<Point3>() / uniq.len() as f64;
        let (e1, e2) = super::plane_basis(&unit);
        uniq.sort_by(|a, b| {
            let ta = (a - c).dot(&e2).atan2((a - c).dot(&e1));
            let tb = (b - c).dot(&e2).atan2((b - c).dot(&e1));
            ta.partial_cmp(&tb).expect("finite angle")
        });
        kept.push(ClipFace { plane, pts: uniq });
    }
    *poly = kept;
}

fn face_normal(pts: &[Point3]) -> Point3 {
    let c = pts.iter().sum::<Point3>() / pts.len() as f64;
    let mut a = Point3::zeros();
    for i in 0..pts.len() {
        a += (pts[i] - c).cross(&(pts[(i + 1) % pts.len()] - c));
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_grid_counts() {
        let m = generate_cube_grid(1);
        assert_eq!((m.num_vertices(), m.num_faces(), m.num_cells()), (8, 6, 1));
        let m = generate_cube_grid(3);
        assert_eq!(m.num_cells(), 27);
        let boundary = (0..m.num_faces())
            .filter(|&f| m.is_boundary_face(f))
            .count();
        // Each axis has n - 1 interior planes of n² squares.
        assert_eq!(boundary, 6 * 9);
        assert_eq!(m.num_faces() - boundary, 3 * 2 * 9);
    }

    #[test]
    fn octahedra_volume_partition() {
        for n in 1..=3 {
            let m = generate_truncated_octahedra(n);
            let vol: f64 = (0..m.num_cells())
                .map(|c| m.cell_geometry(c).unwrap().volume)
                .sum();
            assert!((vol - 1.0).abs() < 1e-12, "n={n}: {vol}");
        }
    }

    #[test]
    fn octahedra_is_deterministic() {
        assert_eq!(
            generate_truncated_octahedra(2),
            generate_truncated_octahedra(2)
        );
    }

    #[test]
    fn interior_cells_are_truncated_octahedra() {
        let n = 2;
        let m = generate_truncated_octahedra(n);
        let a = 1.0 / (2 * n) as f64;
        let regular = (0..m.num_cells())
            .filter(|&c| m.cell(c).len() == 14)
            .filter(|&c| {
                let faces = m.cell(c);
                let hex = faces.iter().filter(|of| m.face(of.face).len() == 6).count();
                hex == 8 && faces.iter().all(|of| !m.is_boundary_face(of.face))
            })
            .collect::<Vec<_>>();
        assert!(!regular.is_empty());
        for c in regular {
            let v = m.cell_geometry(c).unwrap().volume;
            assert!((v - a * a * a / 2.0).abs() < 1e-14);
        }
    }
}
