use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use vemfeti::decomp::{RhoSpec, Variant};
use vemfeti::error::Category;
use vemfeti::experiment::{
    csv_string, default_load, default_tol, emit_csv, run_test1_with, run_test2_with, Case,
    ExperimentConfig, MeshKind, ResultRow, TestKind,
};
use vemfeti::mesh::{
    generate_cube_grid, generate_truncated_octahedra, mesh_quality, read_polymesh,
    write_polymesh_to, PolyMesh,
};
use vemfeti::vem::assemble;
use vemfeti::{Error, Result};

#[derive(Parser)]
#[command(
    name = "vemfeti",
    version,
    about = "Virtual elements with a FETI-DP solver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or inspect meshes of the unit cube.
    Mesh {
        #[command(subcommand)]
        command: MeshCommand,
    },
    /// Glue N³ reflected copies of a reference mesh and solve with FETI-DP.
    Solve(SolveArgs),
    /// Run a scalability or quasi-optimality sweep.
    Experiment {
        #[arg(value_enum)]
        test: TestArg,
        #[arg(long)]
        config: PathBuf,
        /// Use the full sweep sizes; runtime is unbounded.
        #[arg(long)]
        full: bool,
    },
}

#[derive(Subcommand)]
enum MeshCommand {
    Gen {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print `h,h_min,gamma_star,nv,nf,nc` as one CSV row.
    Info { file: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Oct,
    Cube,
}

#[derive(Clone, Copy, ValueEnum)]
enum TestArg {
    Test1,
    Test2,
}

#[derive(clap::Args)]
struct SolveArgs {
    /// Reference mesh file on the unit cube.
    #[arg(long, conflicts_with = "gen", required_unless_present = "gen")]
    mesh: Option<PathBuf>,
    /// Generated reference mesh, `oct:N` or `cube:N`.
    #[arg(long)]
    gen: Option<String>,
    /// Subdomains per axis.
    #[arg(long, default_value_t = 2)]
    subdomains: usize,
    #[arg(long, default_value = "VE")]
    variant: String,
    #[arg(long, default_value = "const:1")]
    rho: String,
    /// Defaults to 1e-6 for constant and 1e-12 for checkerboard coefficients.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    /// Force the source term instead of the default for the coefficients.
    #[arg(long, value_parser = ["sine", "random"])]
    load: Option<String>,
    /// Write the result row here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record wall-clock seconds.
    #[arg(long)]
    timing: bool,
    /// Write the assembled global stiffness matrix as `i j value` lines.
    #[arg(long)]
    dump_matrix: Option<PathBuf>,
    /// Write dense F and M as triplets. Small problems only.
    #[arg(long)]
    dump_feti_ops: Option<PathBuf>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
}

fn io_at(path: &Path) -> impl Fn(io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn mesh_command(cmd: MeshCommand) -> Result<()> {
    match cmd {
        MeshCommand::Gen { kind, n, out } => {
            if n == 0 {
                return Err(Error::Usage("--n must be at least 1".into()));
            }
            let mesh = match kind {
                KindArg::Oct => generate_truncated_octahedra(n),
                KindArg::Cube => generate_cube_grid(n),
            };
            write_polymesh_to(&mesh, &out)
        }
        MeshCommand::Info { file } => {
            let mesh = read_polymesh(&file)?;
            let q = mesh_quality(&mesh)?;
            println!(
                "{:.6e},{:.6e},{:.6e},{},{},{}",
                q.h,
                q.h_min,
                q.gamma_star,
                mesh.num_vertices(),
                mesh.num_faces(),
                mesh.num_cells()
            );
            Ok(())
        }
    }
}

fn generated(spec: &str) -> Result<(MeshKind, String)> {
    let bad = || Error::Usage(format!("bad --gen `{spec}` (want oct:N or cube:N)"));
    let (kind, n) = spec.split_once(':').ok_or_else(bad)?;
    let kind = match kind {
        "oct" => MeshKind::Oct,
        "cube" => MeshKind::Cube,
        _ => return Err(bad()),
    };
    Ok((kind, n.to_string()))
}

fn solve(args: SolveArgs) -> Result<()> {
    let mut config = ExperimentConfig::defaults(TestKind::Scalability);
    let (kind, reference) = match (&args.gen, &args.mesh) {
        (Some(g), _) => generated(g)?,
        (None, Some(p)) => (MeshKind::File, p.display().to_string()),
        (None, None) => return Err(Error::Usage("give --mesh or --gen".into())),
    };
    config.mesh = kind;
    config.references = vec![reference];
    config.subdomains = vec![args.subdomains];
    let variant: Variant = args.variant.parse()?;
    config.variants = vec![variant];
    config.rho = args.rho.parse::<RhoSpec>()?;
    config.gamma = args.gamma;
    config.tol = args.tol.unwrap_or_else(|| default_tol(&config.rho));
    config.load = match args.load.as_deref() {
        Some(l) => l.parse()?,
        None => default_load(&config.rho),
    };
    config.seed = args.seed;
    config.max_iter = args.max_iter;
    config.timing = args.timing;
    config.validate()?;

    let reference: PolyMesh = config.reference_mesh(&config.references[0])?;
    let case = Case::new(&reference, args.subdomains, &config)?;
    if let Some(path) = &args.dump_matrix {
        let system = assemble(&case.mesh, &case.part.cell_rho(), &case.load())?;
        let mut w = create(path)?;
        system.matrix.write_triplets(&mut w).map_err(io_at(path))?;
        w.flush().map_err(io_at(path))?;
    }
    if let Some(path) = &args.dump_feti_ops {
        if args.subdomains < 2 {
            return Err(Error::Usage(
                "--dump-feti-ops needs at least 2 subdomains per axis".into(),
            ));
        }
        let op = case.operator(variant, config.gamma)?;
        let mut w = create(path)?;
        op.write_dense_operators(&mut w).map_err(io_at(path))?;
        w.flush().map_err(io_at(path))?;
    }
    let row = case.run(variant, &config)?;
    write_rows(&[row], args.out.as_deref())
}

fn write_rows(rows: &[ResultRow], out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => emit_csv(rows, path),
        None => {
            print!("{}", csv_string(rows)?);
            Ok(())
        }
    }
}

fn experiment(test: TestArg, config_path: &Path, full: bool) -> Result<()> {
    let test = match test {
        TestArg::Test1 => TestKind::Scalability,
        TestArg::Test2 => TestKind::QuasiOptimality,
    };
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| Error::Usage(format!("{}: {e}", config_path.display())))?;
    let mut config = ExperimentConfig::parse(&text, test)?;
    if full {
        config.full();
    }
    let progress = |r: &ResultRow| eprintln!("{r}");
    match test {
        TestKind::Scalability => {
            let rows = run_test1_with(&config, progress)?;
            write_rows(&rows, config.output.as_deref())
        }
        TestKind::QuasiOptimality => {
            let out = run_test2_with(&config, progress)?;
            write_rows(&out.rows, config.output.as_deref())?;
            for fit in &out.fits {
                eprintln!(
                    "fit {}: sqrt(kappa) = {:.6} (1 + log(H/h)) + {:.6}, R^2 = {:.6}",
                    fit.variant, fit.slope, fit.intercept, fit.r_squared
                );
            }
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Mesh { command } => mesh_command(command),
        Command::Solve(args) => solve(args),
        Command::Experiment { test, config, full } => experiment(test, &config, full),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.category() {
                Category::Usage => 2,
                Category::Numerical => 3,
                Category::Mesh => 4,
            })
        }
    }
}
