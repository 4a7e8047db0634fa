use vemfeti::decomp::Variant;
use vemfeti::experiment::{
    emit_csv, parse_csv, run_test1, run_test2, ExperimentConfig, MeshKind, TestKind,
};
use vemfeti::mesh::{generate_truncated_octahedra, write_polymesh_to};
use vemfeti::Error;

#[test]
fn test1_from_config_text_round_trips_through_a_file() {
    let config = ExperimentConfig::parse(
        "test = 1\nmesh = cube\nreference = 2\nsubdomains = 1, 2, 3\nvariants = E, VE\n",
        TestKind::Scalability,
    )
    .unwrap();
    let rows = run_test1(&config).unwrap();
    assert_eq!(rows.len(), 6);
    assert_eq!(
        rows.iter().map(|r| r.l).collect::<Vec<_>>(),
        [1, 1, 8, 8, 27, 27]
    );
    // Global dofs are the interior vertices of the glued (2N)³ grid.
    assert_eq!(rows[4].dofs, 125);
    // Primal counts: 8 cross points and 36 interior edges at N = 3.
    assert_eq!((rows[4].primal, rows[5].primal), (36, 44));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rows.csv");
    emit_csv(&rows, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let back = parse_csv(&text).unwrap();
    assert_eq!(back.len(), rows.len());
    for (a, b) in back.iter().zip(&rows) {
        // κ is kept to six decimals, everything else exactly.
        assert!((a.kappa - b.kappa).abs() <= 5e-7);
        assert_eq!(
            (a.l, a.variant, a.dofs, a.primal),
            (b.l, b.variant, b.dofs, b.primal)
        );
        assert_eq!((a.iters, a.seconds, a.seed), (b.iters, b.seconds, b.seed));
    }
    assert_eq!(vemfeti::experiment::csv_string(&back).unwrap(), text);
}

#[test]
fn emit_csv_errors() {
    assert!(matches!(
        emit_csv(&[], std::path::Path::new("unused.csv")),
        Err(Error::Usage(_))
    ));
    let mut config = ExperimentConfig::defaults(TestKind::Scalability);
    config.mesh = MeshKind::Cube;
    config.references = vec!["2".into()];
    config.subdomains = vec![1];
    config.variants = vec![Variant::V];
    let rows = run_test1(&config).unwrap();
    let missing = std::path::Path::new("/no/such/dir/rows.csv");
    match emit_csv(&rows, missing) {
        Err(Error::Io { path, .. }) => assert_eq!(path, missing),
        other => panic!("{other:?}"),
    }
}

#[test]
fn test2_on_file_references_fits_a_line() {
    let dir = tempfile::tempdir().unwrap();
    let mut refs = Vec::new();
    for n in [1, 2] {
        let p = dir.path().join(format!("oct{n}.mesh"));
        write_polymesh_to(&generate_truncated_octahedra(n), &p).unwrap();
        refs.push(p.display().to_string());
    }
    let mut config = ExperimentConfig::defaults(TestKind::QuasiOptimality);
    config.mesh = MeshKind::File;
    config.references = refs;
    config.subdomains = vec![2];
    config.variants = vec![Variant::VE];
    let out = run_test2(&config).unwrap();
    assert_eq!(out.rows.len(), 2);
    assert_eq!(out.fits.len(), 1);
    // H/h = 1/h of the reference: 2/√3 and 4/√3.
    assert!((out.h_ratio[0] - 2.0 / 3f64.sqrt()).abs() < 1e-12);
    assert!((out.h_ratio[1] - 4.0 / 3f64.sqrt()).abs() < 1e-12);
    // Two points always lie on a line.
    assert!((out.fits[0].r_squared - 1.0).abs() < 1e-12 || out.fits[0].slope == 0.0);
}

#[test]
fn test2_needs_a_single_subdomain_count() {
    let mut config = ExperimentConfig::defaults(TestKind::QuasiOptimality);
    config.subdomains = vec![2, 3];
    assert!(matches!(run_test2(&config), Err(Error::Usage(_))));
    let mut config = ExperimentConfig::defaults(TestKind::Scalability);
    config.references = vec!["2".into(), "3".into()];
    assert!(matches!(run_test1(&config), Err(Error::Usage(_))));
}

#[test]
fn full_flag_selects_full_sweep_sizes() {
    let mut c = ExperimentConfig::defaults(TestKind::Scalability);
    c.full();
    assert_eq!(c.subdomains, [2, 4, 6, 8, 10, 12]);
    let mut c = ExperimentConfig::defaults(TestKind::QuasiOptimality);
    c.full();
    assert_eq!(c.subdomains, [6]);
    assert_eq!(c.references.first().map(String::as_str), Some("2"));
    assert_eq!(c.references.last().map(String::as_str), Some("9"));
}
