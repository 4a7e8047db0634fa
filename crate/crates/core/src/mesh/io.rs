//! `.poly3d` reader and writer.
//!
//! ```text
//! poly3d 1
//! <nv> <nf> <nc>
//! x y z                 (nv lines)
//! k i1 ... ik           (nf lines, 0-based vertex indices)
//! m ±f1 ... ±fm         (nc lines, 1-based signed face indices)
//! ```
//! Blank lines and `#` comments are ignored.

use std::fmt::Write as _;
use std::path::Path;

use super::{OrientedFace, Point3, PolyMesh};
use crate::error::{Error, Result};

pub fn read_polymesh(path: &Path) -> Result<PolyMesh> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_polymesh(&text)
}

/// Parses `.poly3d` text. Coordinates round-trip exactly.
pub fn parse_polymesh(text: &str) -> Result<PolyMesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let mut next = |what: &str| {
        lines.next().ok_or_else(|| Error::Parse {
            line: text.lines().count() + 1,
            message: format!("unexpected end of file, expected {what}"),
        })
    };

    let (ln, header) = next("header")?;
    if header.split_whitespace().collect::<Vec<_>>() != ["poly3d", "1"] {
        return Err(parse_err(ln, "expected header `poly3d 1`"));
    }
    let (ln, counts) = next("counts")?;
    let counts = numbers::<usize>(ln, counts)?;
    let [nv, nf, nc] = counts[..] else {
        return Err(parse_err(ln, "expected `<nv> <nf> <nc>`"));
    };

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = next("vertex")?;
        let xyz = numbers::<f64>(ln, l)?;
        let [x, y, z] = xyz[..] else {
            return Err(parse_err(ln, "vertex line needs 3 coordinates"));
        };
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(parse_err(ln, "non-finite coordinate"));
        }
        vertices.push(Point3::new(x, y, z));
    }

    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (ln, l) = next("face")?;
        let v = numbers::<usize>(ln, l)?;
        if v.is_empty() || v[0] + 1 != v.len() {
            return Err(parse_err(ln, "face line must be `<k> i1 ... ik`"));
        }
        if let Some(&bad) = v[1..].iter().find(|&&i| i >= nv) {
            return Err(parse_err(ln, &format!("vertex index {bad} out of range")));
        }
        faces.push(v[1..].to_vec());
    }

    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let (ln, l) = next("cell")?;
        let v = numbers::<i64>(ln, l)?;
        if v.is_empty() || v[0] < 0 || v[0] as usize + 1 != v.len() {
            return Err(parse_err(ln, "cell line must be `<m> ±f1 ... ±fm`"));
        }
        let mut cell = Vec::with_capacity(v.len() - 1);
        for &s in &v[1..] {
            let f = s.unsigned_abs() as usize;
            if f == 0 || f > nf {
                return Err(parse_err(ln, &format!("face index {s} out of range")));
            }
            cell.push(OrientedFace {
                face: f - 1,
                outward: s > 0,
            });
        }
        cells.push(cell);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(parse_err(ln, "trailing data after last cell"));
    }
    PolyMesh::new(vertices, faces, cells)
}

/// Serializes with faces oriented outward for their lowest-indexed cell.
pub fn write_polymesh(mesh: &PolyMesh) -> String {
    let mesh = mesh.canonicalized();
    let mut s = String::new();
    writeln!(s, "poly3d 1").unwrap();
    writeln!(
        s,
        "{} {} {}",
        mesh.num_vertices(),
        mesh.num_faces(),
        mesh.num_cells()
    )
    .unwrap();
    for v in mesh.vertices() {
        writeln!(s, "{:?} {:?} {:?}", v.x, v.y, v.z).unwrap();
    }
    for f in mesh.faces() {
        write!(s, "{}", f.len()).unwrap();
        for v in f {
            write!(s, " {v}").unwrap();
        }
        s.push('\n');
    }
    for c in mesh.cells() {
        write!(s, "{}", c.len()).unwrap();
        for of in c {
            let idx = of.face as i64 + 1;
            write!(s, " {}", if of.outward { idx } else { -idx }).unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn write_polymesh_to(mesh: &PolyMesh, path: &Path) -> Result<()> {
    std::fs::write(path, write_polymesh(mesh)).map_err(|e| Error::io(path, e))
}

fn parse_err(line: usize, message: &str) -> Error {
    Error::Parse {
        line,
        message: message.to_string(),
    }
}

fn numbers<T: std::str::FromStr>(line: usize, l: &str) -> Result<Vec<T>> {
    l.split_whitespace()
        .map(|t| {
            t.parse::<T>()
                .map_err(|_| parse_err(line, &format!("cannot parse `{t}`")))
        })
        .collect()
}
