use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::krylov::CholeskyFactor;
use crate::mesh::{generate_cube_grid, generate_truncated_octahedra, OrientedFace};

/// Single-cell mesh: a hexagonal prism of side `s` and height `t`.
fn hex_prism(s: f64, t: f64) -> PolyMesh {
    let mut v = Vec::new();
    for z in [0.0, t] {
        for i in 0..6 {
            let a = std::f64::consts::PI / 3.0 * i as f64;
            v.push(Point3::new(s * a.cos(), s * a.sin(), z));
        }
    }
    let mut faces = vec![(0..6).rev().collect::<Vec<_>>(), (6..12).collect()];
    for i in 0..6 {
        let j = (i + 1) % 6;
        faces.push(vec![i, j, j + 6, i + 6]);
    }
    let cells = vec![(0..8)
        .map(|f| OrientedFace {
            face: f,
            outward: true,
        })
        .collect()];
    PolyMesh::new(v, faces, cells).unwrap()
}

/// Independent face projection: unscaled monomials `{1, x, y}` in a frame
/// anchored at the first vertex, boundary fluxes by two-point Gauss
/// quadrature of the linear trace, solved by SVD.
struct FaceOracle {
    origin: Point3,
    u: Point3,
    w: Point3,
    pts: Vec<[f64; 2]>,
    area: f64,
}

impl FaceOracle {
    fn new(mesh: &PolyMesh, f: usize) -> Self {
        let p: Vec<Point3> = mesh.face(f).iter().map(|&v| mesh.vertex(v)).collect();
        let origin = p[0];
        let u = (p[1] - p[0]).normalize();
        let mut nrm = Point3::zeros();
        for i in 1..p.len() - 1 {
            nrm += (p[i] - p[0]).cross(&(p[i + 1] - p[0]));
        }
        let nrm = nrm.normalize();
        let w = nrm.cross(&u);
        let pts: Vec<[f64; 2]> = p
            .iter()
            .map(|x| [(x - origin).dot(&u), (x - origin).dot(&w)])
            .collect();
        let k = pts.len();
        let area = 0.5
            * (0..k)
                .map(|i| {
                    let (a, b) = (pts[i], pts[(i + 1) % k]);
                    a[0] * b[1] - b[0] * a[1]
                })
                .sum::<f64>();
        FaceOracle {
            origin,
            u,
            w,
            pts,
            area,
        }
    }

    /// Coefficients `(a, b, c)` of `a + b x + c y`.
    fn project(&self, v: &[f64]) -> [f64; 3] {
        let k = self.pts.len();
        let g = [-1.0 / 3f64.sqrt(), 1.0 / 3f64.sqrt()];
        let mut flux = [0.0; 2];
        for i in 0..k {
            let (a, b) = (self.pts[i], self.pts[(i + 1) % k]);
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            // Outward normal times length for a counter-clockwise loop.
            let nl = [dy, -dx];
            for &s in &g {
                let t = 0.5 * (1.0 + s);
                let val = v[i] * (1.0 - t) + v[(i + 1) % k] * t;
                flux[0] += 0.5 * val * nl[0];
                flux[1] += 0.5 * val * nl[1];
            }
        }
        let mut m = DMatrix::zeros(3, 3);
        let mut rhs = DVector::zeros(3);
        m[(0, 0)] = k as f64;
        m[(0, 1)] = self.pts.iter().map(|p| p[0]).sum();
        m[(0, 2)] = self.pts.iter().map(|p| p[1]).sum();
        rhs[0] = v.iter().sum();
        m[(1, 1)] = self.area;
        m[(2, 2)] = self.area;
        rhs[1] = flux[0];
        rhs[2] = flux[1];
        let s = m.svd(true, true).solve(&rhs, 1e-14).unwrap();
        [s[0], s[1], s[2]]
    }

    fn eval(&self, c: [f64; 3], x: &Point3) -> f64 {
        let d = x - self.origin;
        c[0] + c[1] * d.dot(&self.u) + c[2] * d.dot(&self.w)
    }

    /// Mean of the projection over the face by a fan of triangles and
    /// midpoint-of-edges quadrature (exact for linears).
    fn mean(&self, c: [f64; 3]) -> f64 {
        let k = self.pts.len();
        let mut total = 0.0;
        for i in 1..k - 1 {
            let tri = [self.pts[0], self.pts[i], self.pts[i + 1]];
            let a = 0.5
                * ((tri[1][0] - tri[0][0]) * (tri[2][1] - tri[0][1])
                    - (tri[2][0] - tri[0][0]) * (tri[1][1] - tri[0][1]));
            let mut s = 0.0;
            for (p, q) in [(0, 1), (1, 2), (2, 0)] {
                let m = [0.5 * (tri[p][0] + tri[q][0]), 0.5 * (tri[p][1] + tri[q][1])];
                s += c[0] + c[1] * m[0] + c[2] * m[1];
            }
            total += a * s / 3.0;
        }
        total / self.area
    }
}

fn eval_face(p: &FaceProjector, c: [f64; 3], x: &Point3) -> f64 {
    let [xi, eta] = p.local(x);
    c[0] + c[1] * xi + c[2] * eta
}

#[test]
fn face_projector_preserves_constants_and_linears() {
    for mesh in [
        generate_cube_grid(1),
        generate_truncated_octahedra(1),
        hex_prism(0.4, 0.3),
    ] {
        for f in 0..mesh.num_faces() {
            let p = face_projector(&mesh, f).unwrap();
            let one = vec![1.0; p.vertices.len()];
            let c = p.project(&one);
            assert!((c[0] - 1.0).abs() < 1e-13 && c[1].abs() < 1e-13 && c[2].abs() < 1e-13);
            for target in [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.3, -0.7, 2.0]] {
                let vals: Vec<f64> = p
                    .vertices
                    .iter()
                    .map(|&v| {
                        let [xi, eta] = p.local(&mesh.vertex(v));
                        target[0] + target[1] * xi + target[2] * eta
                    })
                    .collect();
                let c = p.project(&vals);
                for a in 0..3 {
                    assert!(
                        (c[a] - target[a]).abs() < 1e-12,
                        "face {f}: {c:?} vs {target:?}"
                    );
                }
            }
        }
    }
}

#[test]
fn hexagon_indicator_matches_quadrature_oracle() {
    let mesh = hex_prism(0.5, 1.0);
    let f = 0;
    let p = face_projector(&mesh, f).unwrap();
    let oracle = FaceOracle::new(&mesh, f);
    for i in 0..6 {
        let mut v = vec![0.0; 6];
        v[i] = 1.0;
        let c = p.project(&v);
        let co = oracle.project(&v);
        for &vert in mesh.face(f) {
            let x = mesh.vertex(vert);
            assert!((eval_face(&p, c, &x) - oracle.eval(co, &x)).abs() < 1e-13);
        }
        assert!((p.average_weights()[i] - oracle.mean(co)).abs() < 1e-13);
    }
}

#[test]
fn face_average_properties() {
    let mesh = generate_truncated_octahedra(2);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for f in (0..mesh.num_faces()).step_by(7) {
        let p = face_projector(&mesh, f).unwrap();
        let s: f64 = p.average_weights().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        let c = 2.5;
        assert!((face_average(&mesh, f, &vec![c; p.vertices.len()]).unwrap() - c).abs() < 1e-12);
        // Mean of a linear is its value at the centroid.
        let lin = |x: &Point3| 1.0 + 2.0 * x.x - x.y + 0.5 * x.z;
        let vals: Vec<f64> = p.vertices.iter().map(|&v| lin(&mesh.vertex(v))).collect();
        assert!((face_average(&mesh, f, &vals).unwrap() - lin(&p.centroid)).abs() < 1e-12);
        // Random data against the quadrature oracle.
        let vals: Vec<f64> = p
            .vertices
            .iter()
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let oracle = FaceOracle::new(&mesh, f);
        let expect = oracle.mean(oracle.project(&vals));
        assert!((face_average(&mesh, f, &vals).unwrap() - expect).abs() < 1e-12);
    }
}

#[test]
fn face_projector_is_idempotent() {
    let mesh = hex_prism(0.3, 0.2);
    for f in 0..mesh.num_faces() {
        let p = face_projector(&mesh, f).unwrap();
        let k = p.vertices.len();
        let d = DMatrix::from_fn(k, 3, |i, b| {
            let [xi, eta] = p.local(&mesh.vertex(p.vertices[i]));
            [1.0, xi, eta][b]
        });
        let twice = &p.coeffs * &d * &p.coeffs;
        assert!((twice - &p.coeffs).amax() < 1e-12);
    }
}

#[test]
fn element_projector_constants_linears_idempotence() {
    let cube = generate_cube_grid(1);
    let oct = generate_truncated_octahedra(1);
    for mesh in [&cube, &oct] {
        let faces = face_projectors(mesh).unwrap();
        for c in 0..mesh.num_cells() {
            let ep = element_projector(mesh, c, &faces).unwrap();
            let n = ep.vertices.len();
            // Π·1 = e₀.
            for r in 0..4 {
                let s: f64 = (0..n).map(|j| ep.pi[(r, j)]).sum();
                assert!((s - if r == 0 { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
            // Linears map to their own coefficients.
            for a in 1..4 {
                let col = ep.d.column(a).clone_owned();
                let coef = &ep.pi * col;
                for r in 0..4 {
                    assert!((coef[r] - if r == a { 1.0 } else { 0.0 }).abs() < 1e-12);
                }
            }
            let twice = &ep.pi * &ep.d * &ep.pi;
            assert!((twice - &ep.pi).amax() < 1e-12);
        }
    }
}

#[test]
fn element_stiffness_kernel_and_linear_energy() {
    let mesh = generate_truncated_octahedra(2);
    let faces = face_projectors(&mesh).unwrap();
    for c in (0..mesh.num_cells()).step_by(5) {
        let rho = 3.0;
        let ops = element_stiffness(&mesh, c, rho, &faces).unwrap();
        let n = ops.projector.vertices.len();
        let k = &ops.k_elem;
        assert!((k - k.transpose()).amax() == 0.0);
        for i in 0..n {
            let s: f64 = (0..n).map(|j| k[(i, j)]).sum();
            assert!(s.abs() < 1e-12 * k.amax());
        }
        // Exactly one zero eigenvalue.
        let mut ev: Vec<f64> = k
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(ev[0].abs() < 1e-12 * ev[n - 1]);
        assert!(ev[1] > 1e-6 * ev[n - 1]);
        // Linear interpolant: energy is ρ|K||∇u|².
        let grad = Vector3::new(0.7, -1.2, 0.4);
        let u = DVector::from_iterator(
            n,
            ops.projector
                .vertices
                .iter()
                .map(|&v| grad.dot(&mesh.vertex(v)) + 0.3),
        );
        let e = (u.transpose() * k * &u)[0];
        let exact = rho * ops.projector.volume * grad.norm_squared();
        assert!((e - exact).abs() < 1e-12 * exact, "{e} vs {exact}");
    }
}

/// Element stiffness of a single cell from first principles: unscaled
/// monomials, face integrals from the quadrature oracle, explicit
/// stabilization on the vertex values.
fn dense_element_oracle(mesh: &PolyMesh, c: usize) -> DMatrix<f64> {
    let verts = mesh.cell_vertices(c);
    let n = verts.len();
    let geo = mesh.cell_geometry(c).unwrap();
    let o = mesh.vertex(verts[0]);
    let mut k = DMatrix::zeros(n, n);
    let mut pis = Vec::new();
    for j in 0..n {
        let mut v = vec![0.0; n];
        v[j] = 1.0;
        let mut flux = Vector3::zeros();
        for of in mesh.cell(c) {
            let fo = FaceOracle::new(mesh, of.face);
            let fv: Vec<f64> = mesh
                .face(of.face)
                .iter()
                .map(|g| v[verts.binary_search(g).unwrap()])
                .collect();
            let integral = fo.mean(fo.project(&fv)) * fo.area;
            let nrm = mesh.face_geometry(of.face).unwrap().normal * of.sign();
            flux += nrm * integral;
        }
        let grad = flux / geo.volume;
        let sum_x: Vector3<f64> = verts.iter().map(|&w| mesh.vertex(w) - o).sum();
        let a0 = (1.0 - grad.dot(&sum_x)) / n as f64;
        pis.push((a0, grad));
    }
    let mut dpi = DMatrix::zeros(n, n);
    for (j, (a0, g)) in pis.iter().enumerate() {
        for (i, &w) in verts.iter().enumerate() {
            dpi[(i, j)] = a0 + g.dot(&(mesh.vertex(w) - o));
        }
    }
    for i in 0..n {
        for j in 0..n {
            k[(i, j)] = geo.volume * pis[i].1.dot(&pis[j].1);
        }
    }
    let r = DMatrix::identity(n, n) - dpi;
    k + r.transpose() * r * geo.diameter
}

fn sorted_eigs(m: DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

#[test]
fn element_matrix_matches_dense_oracle() {
    let cube = generate_cube_grid(1);
    let prism = hex_prism(0.4, 0.7);
    let oct = generate_truncated_octahedra(1);
    for (mesh, cells) in [
        (&cube, vec![0]),
        (&prism, vec![0]),
        (&oct, (0..oct.num_cells()).step_by(9).collect()),
    ] {
        let faces = face_projectors(mesh).unwrap();
        for c in cells {
            let ops = element_stiffness(mesh, c, 1.0, &faces).unwrap();
            let oracle = dense_element_oracle(mesh, c);
            assert!((&ops.k_elem - &oracle).amax() < 1e-12 * oracle.amax());
            let (a, b) = (sorted_eigs(ops.k_elem.clone()), sorted_eigs(oracle));
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12 * b[b.len() - 1]);
            }
        }
    }
}

/// Energy of the discrete harmonic extension of vertex data on a
/// sub-tetrahedral mesh (face centroids and cell centroid condensed out).
fn harmonic_energy_proxy(mesh: &PolyMesh, c: usize) -> DMatrix<f64> {
    let verts = mesh.cell_vertices(c);
    let n = verts.len();
    let m = mesh.cell(c).len();
    let total = n + m + 1;
    let mut pts: Vec<Point3> = verts.iter().map(|&v| mesh.vertex(v)).collect();
    for of in mesh.cell(c) {
        pts.push(mesh.face_geometry(of.face).unwrap().centroid);
    }
    pts.push(mesh.cell_geometry(c).unwrap().centroid);
    let mut a = DMatrix::<f64>::zeros(total, total);
    for (fi, of) in mesh.cell(c).iter().enumerate() {
        let f = mesh.face(of.face);
        for i in 0..f.len() {
            let ids = [
                verts.binary_search(&f[i]).unwrap(),
                verts.binary_search(&f[(i + 1) % f.len()]).unwrap(),
                n + fi,
                n + m,
            ];
            let x: Vec<Point3> = ids.iter().map(|&k| pts[k]).collect();
            let jac = Matrix3::from_columns(&[x[1] - x[0], x[2] - x[0], x[3] - x[0]]);
            let vol = jac.determinant().abs() / 6.0;
            let inv_t = jac.try_inverse().unwrap().transpose();
            let grads = [
                -(inv_t.column(0) + inv_t.column(1) + inv_t.column(2)),
                inv_t.column(0).into(),
                inv_t.column(1).into(),
                inv_t.column(2).into(),
            ];
            for p in 0..4 {
                for q in 0..4 {
                    a[(ids[p], ids[q])] += vol * grads[p].dot(&grads[q]);
                }
            }
        }
    }
    let aii = a.view((n, n), (m + 1, m + 1)).clone_owned();
    let aib = a.view((n, 0), (m + 1, n)).clone_owned();
    let abb = a.view((0, 0), (n, n)).clone_owned();
    abb - aib.transpose() * aii.try_inverse().unwrap() * aib
}

#[test]
fn stabilization_is_spectrally_equivalent_on_projector_kernel() {
    let mut worst: f64 = 1.0;
    for mesh in [
        generate_cube_grid(2),
        generate_truncated_octahedra(1),
        generate_truncated_octahedra(2),
    ] {
        let faces = face_projectors(&mesh).unwrap();
        for c in 0..mesh.num_cells() {
            let ops = element_stiffness(&mesh, c, 1.0, &faces).unwrap();
            let s = harmonic_energy_proxy(&mesh, c);
            let n = ops.projector.vertices.len();
            // ker Π is the range of I - DΠ.
            let comp = DMatrix::identity(n, n) - &ops.projector.d * &ops.projector.pi;
            let svd = comp.svd(true, false);
            let keep: Vec<usize> = (0..n).filter(|&i| svd.singular_values[i] > 1e-8).collect();
            assert_eq!(keep.len(), n - 4);
            let u = svd.u.unwrap();
            let z = DMatrix::from_fn(n, keep.len(), |r, c| u[(r, keep[c])]);
            let a = z.transpose() * &ops.k_stab * &z;
            let b = z.transpose() * &s * &z;
            let l = b.cholesky().unwrap().l();
            let li = l.try_inverse().unwrap();
            let ev = sorted_eigs(&li * a * li.transpose());
            worst = worst.max(ev[ev.len() - 1] / ev[0]);
        }
    }
    println!("stabilization c2/c1 = {worst:.3}");
    assert!(worst < 100.0, "c2/c1 = {worst}");
}

#[test]
fn cube_grid_two_has_one_dof_equal_to_sum_of_elements() {
    let mesh = generate_cube_grid(2);
    let sys = assemble(&mesh, &[1.0; 8], &LoadSpec::Zero).unwrap();
    assert_eq!(sys.num_dofs(), 1);
    let centre = sys.vertex_of_dof[0];
    let faces = face_projectors(&mesh).unwrap();
    let mut expect = 0.0;
    for c in 0..8 {
        let ops = element_stiffness(&mesh, c, 1.0, &faces).unwrap();
        let i = ops.projector.vertices.binary_search(&centre).unwrap();
        expect += ops.k_elem[(i, i)];
    }
    assert!((sys.matrix.get(0, 0) - expect).abs() < 1e-14 * expect);
    let g = |_: &Point3| 2.0;
    let sys = assemble(&mesh, &[1.0; 8], &LoadSpec::Function(&g)).unwrap();
    // Eight cells of volume 1/8 give a share of 2 · 1/8 / 8 each.
    assert!((sys.rhs[0] - 8.0 * 2.0 / 64.0).abs() < 1e-15);
    let u = solve_direct(&sys).unwrap();
    assert!((u[centre] - sys.rhs[0] / sys.matrix.get(0, 0)).abs() < 1e-15);
}

#[test]
fn zero_load_gives_zero_solution() {
    let mesh = generate_truncated_octahedra(1);
    let sys = assemble(&mesh, &vec![1.0; mesh.num_cells()], &LoadSpec::Zero).unwrap();
    assert!(sys.rhs.iter().all(|&v| v == 0.0));
    assert!(solve_direct(&sys).unwrap().iter().all(|&v| v == 0.0));
}

#[test]
fn patch_test_on_generated_meshes() {
    let lin = |x: &Point3| 0.3 + 1.1 * x.x - 0.8 * x.y + 2.0 * x.z;
    for mesh in [
        generate_cube_grid(2),
        generate_cube_grid(3),
        generate_truncated_octahedra(1),
        generate_truncated_octahedra(2),
    ] {
        let u = solve_lifted(&mesh, &vec![1.0; mesh.num_cells()], &lin).unwrap();
        let err = (0..mesh.num_vertices())
            .map(|v| (u[v] - lin(&mesh.vertex(v))).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "patch test error {err}");
    }
}

#[test]
fn assembled_matrix_is_spd_and_solves_accurately() {
    let mesh = generate_cube_grid(4);
    let sys = assemble(&mesh, &vec![1.0; 64], &LoadSpec::Zero).unwrap();
    let dense = sys.matrix.to_dense();
    assert!(sorted_eigs(dense)[0] > 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let b: Vec<f64> = (0..sys.num_dofs())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let x = CholeskyFactor::new(&sys.matrix).unwrap().solve(&b);
    let r: f64 = sys
        .matrix
        .mul_vec(&x)
        .iter()
        .zip(&b)
        .map(|(a, c)| (a - c).powi(2))
        .sum::<f64>()
        .sqrt();
    let bn: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(r / bn <= 1e-12);
}

#[test]
fn rejects_bad_coefficients() {
    let mesh = generate_cube_grid(2);
    assert!(matches!(
        assemble(&mesh, &[1.0; 7], &LoadSpec::Zero),
        Err(Error::Usage(_))
    ));
    let mut rho = [1.0; 8];
    rho[3] = 0.0;
    assert!(matches!(
        assemble(&mesh, &rho, &LoadSpec::Zero),
        Err(Error::Usage(_))
    ));
    assert!(matches!(
        assemble(&generate_cube_grid(1), &[1.0], &LoadSpec::Zero),
        Err(Error::Usage(_))
    ));
}
