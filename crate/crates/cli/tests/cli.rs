use std::path::Path;
use std::process::{Command, Output};

fn vemfeti(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vemfeti"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn mesh_gen_then_info() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("oct.mesh");
    let o = vemfeti(&[
        "mesh",
        "gen",
        "--kind",
        "oct",
        "--n",
        "2",
        "--out",
        path(&file),
    ]);
    assert!(o.status.success(), "{o:?}");
    let o = vemfeti(&["mesh", "info", path(&file)]);
    assert!(o.status.success());
    let out = stdout(&o);
    let fields: Vec<&str> = out.trim().split(',').collect();
    assert_eq!(fields.len(), 6);
    let h: f64 = fields[0].parse().unwrap();
    assert!((h - 3f64.sqrt() / 4.0).abs() < 1e-6);

    let file = dir.path().join("cube.mesh");
    let o = vemfeti(&[
        "mesh",
        "gen",
        "--kind",
        "cube",
        "--n",
        "3",
        "--out",
        path(&file),
    ]);
    assert!(o.status.success());
    let out = stdout(&vemfeti(&["mesh", "info", path(&file)]));
    assert!(out.trim().ends_with(",64,108,27"), "{out}");
}

#[test]
fn solve_prints_one_row() {
    let o = vemfeti(&["solve", "--gen", "cube:2", "--subdomains", "2"]);
    assert!(o.status.success(), "{o:?}");
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "L,variant,dofs,primal,kappa,iters,seconds,seed");
    assert_eq!(lines[1], "8,VE,27,7,1.000000,1,0.000,0");
}

#[test]
fn solve_writes_dumps_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("row.csv");
    let k = dir.path().join("k.txt");
    let ops = dir.path().join("ops.txt");
    let o = vemfeti(&[
        "solve",
        "--gen",
        "cube:2",
        "--subdomains",
        "2",
        "--variant",
        "F",
        "--rho",
        "checkerboard:10,0.1",
        "--seed",
        "5",
        "--out",
        path(&csv),
        "--dump-matrix",
        path(&k),
        "--dump-feti-ops",
        path(&ops),
    ]);
    assert!(o.status.success(), "{o:?}");
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().ends_with(",5"));

    // The glued 4×4×4 grid has 3³ free dofs.
    let k = std::fs::read_to_string(&k).unwrap();
    assert!(k.lines().all(|l| l.split_whitespace().count() == 3));
    let max_index = k
        .lines()
        .map(|l| {
            l.split_whitespace()
                .next()
                .unwrap()
                .parse::<usize>()
                .unwrap()
        })
        .max()
        .unwrap();
    assert_eq!(max_index, 26);

    let ops = std::fs::read_to_string(&ops).unwrap();
    assert!(ops.starts_with("# dim "));
    assert!(ops.lines().any(|l| l.starts_with("F ")));
    assert!(ops.lines().any(|l| l.starts_with("M ")));
}

#[test]
fn exit_codes() {
    assert_eq!(
        vemfeti(&["solve", "--gen", "cube:2", "--variant", "X"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        vemfeti(&["solve", "--gen", "cube:2", "--rho", "const:-1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(vemfeti(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        vemfeti(&["solve", "--mesh", "/definitely/not/here"])
            .status
            .code(),
        Some(4)
    );
    assert_eq!(
        vemfeti(&[
            "solve",
            "--gen",
            "cube:2",
            "--subdomains",
            "3",
            "--variant",
            "V",
            "--max-iter",
            "1"
        ])
        .status
        .code(),
        Some(3)
    );

    // A mesh that is not the unit cube cannot be glued.
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.mesh");
    let o = vemfeti(&[
        "mesh",
        "gen",
        "--kind",
        "cube",
        "--n",
        "1",
        "--out",
        path(&file),
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&file)
        .unwrap()
        .replace("1.0 1.0 1.0", "2.0 2.0 2.0");
    std::fs::write(&file, text).unwrap();
    let code = vemfeti(&["solve", "--mesh", path(&file)]).status.code();
    assert_eq!(code, Some(4));
}

#[test]
fn experiment_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t1.csv");
    let cfg = dir.path().join("t1.cfg");
    std::fs::write(
        &cfg,
        format!(
            "test = 1\nmesh = cube\nreference = 2\nsubdomains = 1, 2\nvariants = V, VE\noutput = {}\n",
            out.display()
        ),
    )
    .unwrap();
    let o = vemfeti(&["experiment", "test1", "--config", path(&cfg)]);
    assert!(o.status.success(), "{o:?}");
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(
        text,
        "L,variant,dofs,primal,kappa,iters,seconds,seed\n\
         1,V,1,0,1.000000,0,0.000,0\n\
         1,VE,1,0,1.000000,0,0.000,0\n\
         8,V,27,1,1.000000,1,0.000,0\n\
         8,VE,27,7,1.000000,1,0.000,0\n"
    );

    let cfg2 = dir.path().join("t2.cfg");
    std::fs::write(
        &cfg2,
        "mesh = cube\nreference = 2, 3\nsubdomains = 2\nvariants = VE\n",
    )
    .unwrap();
    let o = vemfeti(&["experiment", "test2", "--config", path(&cfg2)]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(stdout(&o).lines().count(), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("fit VE"));

    // Wrong test for the config, unknown key, missing file.
    assert_eq!(
        vemfeti(&["experiment", "test2", "--config", path(&cfg)])
            .status
            .code(),
        Some(2)
    );
    std::fs::write(&cfg2, "colour = blue\n").unwrap();
    assert_eq!(
        vemfeti(&["experiment", "test2", "--config", path(&cfg2)])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        vemfeti(&["experiment", "test1", "--config", "/no/such.cfg"])
            .status
            .code(),
        Some(2)
    );
}
