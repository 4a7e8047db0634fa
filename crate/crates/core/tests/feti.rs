use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vemfeti::decomp::{partition_box, Partition, RhoSpec, Variant};
use vemfeti::experiment::sine_load;
use vemfeti::fetidp::FetiOperator;
use vemfeti::krylov::PcgOptions;
use vemfeti::mesh::{generate_cube_grid, generate_truncated_octahedra, glue_reflected, PolyMesh};
use vemfeti::vem::LoadSpec;

fn glued(reference: &PolyMesh, n: usize, rho: RhoSpec) -> (PolyMesh, Partition) {
    let mesh = glue_reflected(reference, n).unwrap();
    let part = partition_box(&mesh, n).unwrap().with_rho(rho);
    (mesh, part)
}

const TIGHT: PcgOptions = PcgOptions {
    tol: 1e-12,
    max_iter: 1000,
};

fn kappa(mesh: &PolyMesh, part: &Partition, variant: Variant) -> f64 {
    let op = FetiOperator::new(mesh, part, variant, 1.0, &LoadSpec::Function(&sine_load)).unwrap();
    let sol = op.solve(TIGHT).unwrap();
    assert!(sol.report.converged);
    sol.report.kappa_est
}

#[test]
fn richer_primal_spaces_do_not_worsen_kappa() {
    for reference in [generate_cube_grid(3), generate_truncated_octahedra(2)] {
        let (mesh, part) = glued(&reference, 3, RhoSpec::Const(1.0));
        let vef = kappa(&mesh, &part, Variant::VEF);
        let ve = kappa(&mesh, &part, Variant::VE);
        let e = kappa(&mesh, &part, Variant::E);
        assert!(vef <= ve * 1.05, "VEF {vef} VE {ve}");
        assert!(ve <= e * 1.05, "VE {ve} E {e}");
    }
}

/// Nonzero eigenvalues of `M F` through the symmetric `F^½ M F^½`.
fn exact_condition(f: &DMatrix<f64>, m: &DMatrix<f64>) -> f64 {
    let eig = f.clone().symmetric_eigen();
    let root = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let f_half = &eig.eigenvectors * DMatrix::from_diagonal(&root) * eig.eigenvectors.transpose();
    let s = &f_half * m * &f_half;
    let s = (&s + s.transpose()) * 0.5;
    let ev = s.symmetric_eigenvalues();
    let top = ev.max();
    let nonzero: Vec<f64> = ev.iter().copied().filter(|&l| l > 1e-10 * top).collect();
    top / nonzero.iter().copied().fold(f64::INFINITY, f64::min)
}

#[test]
fn lanczos_estimate_is_close_to_the_exact_condition_number() {
    let reference = generate_cube_grid(2);
    for (rho, variant) in [
        (RhoSpec::Const(1.0), Variant::V),
        (RhoSpec::Checkerboard(100.0, 0.01), Variant::E),
        (RhoSpec::Checkerboard(1e3, 1e-3), Variant::F),
    ] {
        let (mesh, part) = glued(&reference, 3, rho);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let free = (0..mesh.num_vertices())
            .filter(|&v| !mesh.is_boundary_vertex(v))
            .count();
        let load = LoadSpec::Vector((0..free).map(|_| rng.random_range(-1.0..1.0)).collect());
        let op = FetiOperator::new(&mesh, &part, variant, 1.0, &load).unwrap();
        let (f, m) = op.dense_operators();
        let exact = exact_condition(&f, &m);
        let sol = op.solve(TIGHT).unwrap();
        let est = sol.report.kappa_est;
        assert!(
            (est - exact).abs() <= 0.1 * exact,
            "{variant}: estimate {est} vs exact {exact}"
        );
    }
}

#[test]
fn operators_are_symmetric_on_many_pairs() {
    let (mesh, part) = glued(
        &generate_truncated_octahedra(2),
        2,
        RhoSpec::Checkerboard(1e5, 1e-5),
    );
    let op = FetiOperator::new(&mesh, &part, Variant::VE, 1.0, &LoadSpec::Zero).unwrap();
    let m = op.num_multipliers();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut vecs: Vec<Vec<f64>> = (0..30)
        .map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    vecs.push(vec![1.0; m]);
    for pair in vecs.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        for apply in [
            &(|x: &[f64]| op.apply_f(x)) as &dyn Fn(&[f64]) -> Vec<f64>,
            &|x: &[f64]| op.apply_m(x),
        ] {
            let (x, y) = (dot(b, &apply(a)), dot(a, &apply(b)));
            assert!((x - y).abs() <= 1e-8 * x.abs().max(y.abs()).max(1e-300));
        }
    }
}

#[test]
fn bad_scaling_exponent_is_rejected() {
    let (mesh, part) = glued(&generate_cube_grid(2), 2, RhoSpec::Const(1.0));
    let err = FetiOperator::new(&mesh, &part, Variant::VE, 0.25, &LoadSpec::Zero).unwrap_err();
    assert!(matches!(err, vemfeti::Error::Usage(_)));
}

#[test]
fn single_subdomain_has_no_primal_constraints() {
    let (mesh, part) = glued(&generate_cube_grid(2), 1, RhoSpec::Const(1.0));
    let err = FetiOperator::new(&mesh, &part, Variant::VE, 1.0, &LoadSpec::Zero).unwrap_err();
    assert!(matches!(err, vemfeti::Error::Usage(_)), "{err}");
}
