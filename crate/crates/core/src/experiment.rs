//! Drivers for the scalability sweep (fixed `H/h`, growing `L`) and the
//! quasi-optimality sweep (fixed `L`, refined reference meshes), with
//! their CSV output.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::decomp::{partition_box, Partition, RhoSpec, Variant};
use crate::error::{Error, Result};
use crate::fetidp::{FetiOperator, FetiSolution};
use crate::krylov::PcgOptions;
use crate::mesh::{
    generate_cube_grid, generate_truncated_octahedra, glue_reflected, mesh_quality, read_polymesh,
    Point3, PolyMesh,
};
use crate::vem::{assemble, solve_direct, LoadSpec};

pub const CSV_HEADER: [&str; 8] = [
    "L", "variant", "dofs", "primal", "kappa", "iters", "seconds", "seed",
];

/// `sin(2πx) sin(2πy) sin(2πz)`, the source used with constant coefficients.
pub fn sine_load(p: &Point3) -> f64 {
    use std::f64::consts::TAU;
    (TAU * p.x).sin() * (TAU * p.y).sin() * (TAU * p.z).sin()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestKind {
    Scalability,
    QuasiOptimality,
}

impl FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1" | "test1" => Ok(TestKind::Scalability),
            "2" | "test2" => Ok(TestKind::QuasiOptimality),
            _ => Err(Error::Usage(format!("unknown test `{s}` (want 1 or 2)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshKind {
    Oct,
    Cube,
    File,
}

impl FromStr for MeshKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "oct" => Ok(MeshKind::Oct),
            "cube" => Ok(MeshKind::Cube),
            "file" => Ok(MeshKind::File),
            _ => Err(Error::Usage(format!(
                "unknown mesh kind `{s}` (want oct, cube or file)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadKind {
    Sine,
    /// Uniform in `[-1, 1]` on every free dof, drawn from the seed.
    Random,
}

impl FromStr for LoadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "sine" => Ok(LoadKind::Sine),
            "random" => Ok(LoadKind::Random),
            _ => Err(Error::Usage(format!(
                "unknown load `{s}` (want sine or random)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub test: TestKind,
    pub mesh: MeshKind,
    /// Generator parameter `n` for `oct` and `cube`, a path for `file`.
    pub references: Vec<String>,
    /// Subdomains per axis; `L = N³`.
    pub subdomains: Vec<usize>,
    pub variants: Vec<Variant>,
    pub rho: RhoSpec,
    pub gamma: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub load: LoadKind,
    pub output: Option<PathBuf>,
    /// Record wall-clock seconds; off keeps the CSV reproducible.
    pub timing: bool,
}

/// Stopping tolerance used with `rho` unless one is given.
pub fn default_tol(rho: &RhoSpec) -> f64 {
    match rho {
        RhoSpec::Const(_) => 1e-6,
        RhoSpec::Checkerboard(..) => 1e-12,
    }
}

/// Source term used with `rho` unless one is given.
pub fn default_load(rho: &RhoSpec) -> LoadKind {
    match rho {
        RhoSpec::Const(_) => LoadKind::Sine,
        RhoSpec::Checkerboard(..) => LoadKind::Random,
    }
}

fn list<T: FromStr<Err = Error>>(value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(T::from_str)
        .collect()
}

fn number<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Usage(format!("{key}: cannot parse `{value}`")))
}

impl ExperimentConfig {
    /// Desk-scale defaults: `L ∈ {8, 27, 64}` on oct₃ for the scalability
    /// sweep, `N = 3` over oct₁ to oct₄ for the quasi-optimality sweep.
    pub fn defaults(test: TestKind) -> Self {
        let (references, subdomains) = match test {
            TestKind::Scalability => (vec!["4".to_string()], vec![2, 3, 4]),
            TestKind::QuasiOptimality => ((2..=5).map(|n| n.to_string()).collect(), vec![3]),
        };
        let rho = RhoSpec::Const(1.0);
        ExperimentConfig {
            test,
            mesh: MeshKind::Oct,
            references,
            subdomains,
            variants: Variant::ALL.to_vec(),
            rho,
            gamma: 1.0,
            tol: default_tol(&rho),
            max_iter: 1000,
            seed: 0,
            load: default_load(&rho),
            output: None,
            timing: false,
        }
    }

    /// Reads `key = value` lines over the defaults of `test`. `#` starts a
    /// comment, lists are comma separated. A `test` key must agree with
    /// `test`.
    pub fn parse(text: &str, test: TestKind) -> Result<Self> {
        let mut c = Self::defaults(test);
        let mut tol = None;
        let mut load = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let at = |e: Error| Error::Usage(format!("config line {}: {e}", i + 1));
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Usage(format!("config line {}: expected `key = value`", i + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let r: Result<()> = (|| {
                match key {
                    "test" => {
                        if value.parse::<TestKind>()? != test {
                            return Err(Error::Usage(format!(
                                "config is for test {value}, not this one"
                            )));
                        }
                    }
                    "mesh" => c.mesh = value.parse()?,
                    "reference" => {
                        c.references = value
                            .split(',')
                            .map(|t| t.trim().to_string())
                            .filter(|t| !t.is_empty())
                            .collect()
                    }
                    "subdomains" => {
                        c.subdomains = value
                            .split(',')
                            .map(|t| number(key, t))
                            .collect::<Result<_>>()?
                    }
                    "variants" => c.variants = list(value)?,
                    "rho" => c.rho = value.parse()?,
                    "gamma" => c.gamma = number(key, value)?,
                    "tol" => tol = Some(number(key, value)?),
                    "max_iter" => c.max_iter = number(key, value)?,
                    "seed" => c.seed = number(key, value)?,
                    "load" => load = Some(value.parse()?),
                    "output" => c.output = Some(PathBuf::from(value)),
                    "timing" => c.timing = number(key, value)?,
                    _ => return Err(Error::Usage(format!("unknown key `{key}`"))),
                }
                Ok(())
            })();
            r.map_err(at)?;
        }
        c.tol = tol.unwrap_or_else(|| default_tol(&c.rho));
        c.load = load.unwrap_or_else(|| default_load(&c.rho));
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Usage(format!("tol {} must be positive", self.tol)));
        }
        if self.subdomains.is_empty() || self.subdomains.contains(&0) {
            return Err(Error::Usage(
                "subdomains must list counts of at least 1".into(),
            ));
        }
        if self.references.is_empty() {
            return Err(Error::Usage("no reference mesh given".into()));
        }
        if self.variants.is_empty() {
            return Err(Error::Usage("no variant given".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Usage("max_iter must be positive".into()));
        }
        Ok(())
    }

    /// Switches to the full sweep sizes: `L` up to 1728, or `L = 216` over
    /// oct₁ to oct₈.
    pub fn full(&mut self) {
        match self.test {
            TestKind::Scalability => self.subdomains = vec![2, 4, 6, 8, 10, 12],
            TestKind::QuasiOptimality => {
                self.subdomains = vec![6];
                if self.mesh == MeshKind::Oct {
                    self.references = (2..=9).map(|n| n.to_string()).collect();
                }
            }
        }
    }

    pub fn reference_mesh(&self, id: &str) -> Result<PolyMesh> {
        let n = || -> Result<usize> {
            match id.trim().parse::<usize>() {
                Ok(n) if n >= 1 => Ok(n),
                _ => Err(Error::Usage(format!("bad reference `{id}`"))),
            }
        };
        match self.mesh {
            MeshKind::Oct => Ok(generate_truncated_octahedra(n()?)),
            MeshKind::Cube => Ok(generate_cube_grid(n()?)),
            MeshKind::File => read_polymesh(Path::new(id)),
        }
    }

    fn pcg_options(&self) -> PcgOptions {
        PcgOptions {
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }
}

/// One line of the results table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub l: usize,
    pub variant: Variant,
    pub dofs: usize,
    pub primal: usize,
    pub kappa: f64,
    pub iters: usize,
    pub seconds: f64,
    pub seed: u64,
}

/// Glued global mesh for one `N`, with its partition and load.
pub struct Case {
    pub n: usize,
    pub mesh: PolyMesh,
    pub part: Partition,
    random: Option<Vec<f64>>,
}

impl Case {
    pub fn new(reference: &PolyMesh, n: usize, config: &ExperimentConfig) -> Result<Self> {
        let mesh = glue_reflected(reference, n)?;
        let part = partition_box(&mesh, n)?.with_rho(config.rho);
        let random = match config.load {
            LoadKind::Sine => None,
            LoadKind::Random => {
                let free = (0..mesh.num_vertices())
                    .filter(|&v| !mesh.is_boundary_vertex(v))
                    .count();
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                Some((0..free).map(|_| rng.random_range(-1.0..=1.0)).collect())
            }
        };
        Ok(Case {
            n,
            mesh,
            part,
            random,
        })
    }

    pub fn load(&self) -> LoadSpec<'static> {
        match &self.random {
            Some(f) => LoadSpec::Vector(f.clone()),
            None => LoadSpec::Function(&sine_load),
        }
    }

    pub fn operator(&self, variant: Variant, gamma: f64) -> Result<FetiOperator> {
        FetiOperator::new(&self.mesh, &self.part, variant, gamma, &self.load())
    }

    /// Solves with `variant`. A single subdomain is solved directly and
    /// reported with `κ = 1`, no iterations and no primal dofs.
    ///
    /// Non-convergence is an error.
    pub fn run(&self, variant: Variant, config: &ExperimentConfig) -> Result<ResultRow> {
        let start = Instant::now();
        let l = self.n.pow(3);
        let (dofs, primal, kappa, iters) = if self.n == 1 {
            let system = assemble(&self.mesh, &self.part.cell_rho(), &self.load())?;
            solve_direct(&system)?;
            (system.num_dofs(), 0, 1.0, 0)
        } else {
            let op = self.operator(variant, config.gamma)?;
            let sol = op.solve(config.pcg_options())?;
            check_converged(&sol, l, variant)?;
            (
                op.global_dofs,
                op.num_primal(),
                sol.report.kappa_est,
                sol.report.iterations,
            )
        };
        Ok(ResultRow {
            l,
            variant,
            dofs,
            primal,
            kappa,
            iters,
            seconds: if config.timing {
                start.elapsed().as_secs_f64()
            } else {
                0.0
            },
            seed: config.seed,
        })
    }
}

fn check_converged(sol: &FetiSolution, l: usize, variant: Variant) -> Result<()> {
    if sol.report.converged {
        Ok(())
    } else {
        Err(Error::Numerical(format!(
            "L={l}, {variant}: no convergence after {} iterations (residual {:e})",
            sol.report.iterations,
            sol.report.residual_history.last().copied().unwrap_or(1.0)
        )))
    }
}

/// Scalability sweep: one reference mesh, every `N` and variant.
pub fn run_test1(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    run_test1_with(config, |_| {})
}

/// [`run_test1`], calling `progress` after each row.
pub fn run_test1_with(
    config: &ExperimentConfig,
    mut progress: impl FnMut(&ResultRow),
) -> Result<Vec<ResultRow>> {
    config.validate()?;
    if config.references.len() != 1 {
        return Err(Error::Usage(format!(
            "test 1 takes one reference mesh, got {}",
            config.references.len()
        )));
    }
    let reference = config.reference_mesh(&config.references[0])?;
    let mut rows = Vec::new();
    for &n in &config.subdomains {
        let case = Case::new(&reference, n, config)?;
        for &variant in &config.variants {
            let row = case.run(variant, config)?;
            progress(&row);
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Least-squares line `y = slope·x + intercept` of `√κ` against
/// `1 + log(H/h)` for one variant.
#[derive(Debug, Clone, PartialEq)]
pub struct LogFit {
    pub variant: Variant,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `(1 + log(H/h), √κ)`.
    pub points: Vec<(f64, f64)>,
}

pub fn fit_line(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    (slope, my - slope * mx, r2)
}

#[derive(Debug, Clone)]
pub struct Test2Output {
    pub rows: Vec<ResultRow>,
    /// `H/h` of each reference, in config order.
    pub h_ratio: Vec<f64>,
    pub fits: Vec<LogFit>,
}

/// Quasi-optimality sweep: one `N`, every reference mesh and variant.
/// `H/h` is the inverse mesh size of the reference on the unit cube.
pub fn run_test2(config: &ExperimentConfig) -> Result<Test2Output> {
    run_test2_with(config, |_| {})
}

/// [`run_test2`], calling `progress` after each row.
pub fn run_test2_with(
    config: &ExperimentConfig,
    mut progress: impl FnMut(&ResultRow),
) -> Result<Test2Output> {
    config.validate()?;
    if config.subdomains.len() != 1 {
        return Err(Error::Usage(format!(
            "test 2 takes one subdomain count, got {}",
            config.subdomains.len()
        )));
    }
    let n = config.subdomains[0];
    let mut rows = Vec::new();
    let mut h_ratio = Vec::new();
    for id in &config.references {
        let reference = config.reference_mesh(id)?;
        h_ratio.push(1.0 / mesh_quality(&reference)?.h);
        let case = Case::new(&reference, n, config)?;
        for &variant in &config.variants {
            let row = case.run(variant, config)?;
            progress(&row);
            rows.push(row);
        }
    }
    let nv = config.variants.len();
    let fits = if h_ratio.len() < 2 {
        Vec::new()
    } else {
        config
            .variants
            .iter()
            .enumerate()
            .map(|(k, &variant)| {
                let points: Vec<(f64, f64)> = h_ratio
                    .iter()
                    .enumerate()
                    .map(|(m, hr)| (1.0 + hr.ln(), rows[m * nv + k].kappa.sqrt()))
                    .collect();
                let (slope, intercept, r_squared) = fit_line(&points);
                LogFit {
                    variant,
                    slope,
                    intercept,
                    r_squared,
                    points,
                }
            })
            .collect()
    };
    Ok(Test2Output {
        rows,
        h_ratio,
        fits,
    })
}

/// Six decimals, switching to scientific notation from `10⁶` on.
pub fn format_kappa(kappa: f64) -> String {
    if kappa < 1e6 {
        format!("{kappa:.6}")
    } else {
        format!("{kappa:.6e}")
    }
}

impl fmt::Display for ResultRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "L={} {} dofs={} primal={} kappa={} it={}",
            self.l,
            self.variant,
            self.dofs,
            self.primal,
            format_kappa(self.kappa),
            self.iters
        )
    }
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::io("<csv>", e),
        other => Error::Usage(format!("csv: {other:?}")),
    }
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(csv_error)?;
    for r in rows {
        w.write_record([
            r.l.to_string(),
            r.variant.to_string(),
            r.dofs.to_string(),
            r.primal.to_string(),
            format_kappa(r.kappa),
            r.iters.to_string(),
            format!("{:.3}", r.seconds),
            r.seed.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

pub fn csv_string(rows: &[ResultRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is ASCII"))
}

pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Usage("no rows to write".into()));
    }
    let text = csv_string(rows)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().map_err(csv_error)?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Parse {
            line: 1,
            message: "unexpected csv header".into(),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        let line = i + 2;
        let field = |k: usize| -> Result<&str> {
            rec.get(k).ok_or_else(|| Error::Parse {
                line,
                message: format!("missing column {}", CSV_HEADER[k]),
            })
        };
        let num = |k: usize| -> Result<f64> {
            field(k)?.parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad {}", CSV_HEADER[k]),
            })
        };
        let int = |k: usize| -> Result<u64> {
            field(k)?.parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad {}", CSV_HEADER[k]),
            })
        };
        rows.push(ResultRow {
            l: int(0)? as usize,
            variant: field(1)?.parse().map_err(|e: Error| Error::Parse {
                line,
                message: e.to_string(),
            })?,
            dofs: int(2)? as usize,
            primal: int(3)? as usize,
            kappa: num(4)?,
            iters: int(5)? as usize,
            seconds: num(6)?,
            seed: int(7)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(kappa: f64) -> ResultRow {
        ResultRow {
            l: 8,
            variant: Variant::VE,
            dofs: 31207,
            primal: 7,
            kappa,
            iters: 1,
            seconds: 0.0,
            seed: 42,
        }
    }

    #[test]
    fn one_row_gives_two_lines() {
        let text = csv_string(&[row(1.0)]).unwrap();
        assert_eq!(
            text,
            "L,variant,dofs,primal,kappa,iters,seconds,seed\n8,VE,31207,7,1.000000,1,0.000,42\n"
        );
    }

    #[test]
    fn kappa_formatting() {
        assert_eq!(format_kappa(1.0), "1.000000");
        assert_eq!(format_kappa(1.5755554), "1.575555");
        assert_eq!(format_kappa(4.48292e9), "4.482920e9");
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![row(1.0), row(2.389406), row(4.48292e9)];
        let text = csv_string(&rows).unwrap();
        let back = parse_csv(&text).unwrap();
        assert_eq!(back, rows);
        assert_eq!(csv_string(&back).unwrap(), text);
    }

    #[test]
    fn rejects_bad_header() {
        assert!(parse_csv("a,b\n1,2\n").is_err());
    }

    #[test]
    fn config_parsing_and_defaults() {
        let c = ExperimentConfig::parse(
            "# sweep\nmesh = cube\nreference = 2\nsubdomains = 2, 3\nvariants = V, ve\n\
             rho = checkerboard:1e5,1e-5\nseed = 7\n",
            TestKind::Scalability,
        )
        .unwrap();
        assert_eq!(c.mesh, MeshKind::Cube);
        assert_eq!(c.subdomains, vec![2, 3]);
        assert_eq!(c.variants, vec![Variant::V, Variant::VE]);
        assert_eq!(c.tol, 1e-12);
        assert_eq!(c.load, LoadKind::Random);
        assert_eq!(c.seed, 7);
        assert_eq!(c.gamma, 1.0);

        let d = ExperimentConfig::parse("", TestKind::QuasiOptimality).unwrap();
        assert_eq!(d.references, vec!["2", "3", "4", "5"]);
        assert_eq!(d.subdomains, vec![3]);
        assert_eq!(d.tol, 1e-6);
    }

    #[test]
    fn config_errors_are_usage_errors() {
        for text in [
            "subdomains = 0",
            "tol = -1",
            "colour = red",
            "variants = X",
            "test = 2",
            "no equals sign",
            "reference =",
        ] {
            let e = ExperimentConfig::parse(text, TestKind::Scalability).unwrap_err();
            assert!(matches!(e, Error::Usage(_)), "{text}: {e}");
        }
    }

    #[test]
    fn empty_reference_list_is_rejected() {
        let mut c = ExperimentConfig::defaults(TestKind::QuasiOptimality);
        c.references.clear();
        assert!(matches!(run_test2(&c), Err(Error::Usage(_))));
    }

    #[test]
    fn line_fit_recovers_exact_line() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 2.0 * i as f64 - 1.0)).collect();
        let (s, b, r2) = fit_line(&pts);
        assert!((s - 2.0).abs() < 1e-14 && (b + 1.0).abs() < 1e-14);
        assert!((r2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn single_subdomain_is_a_direct_solve() {
        let mut c = ExperimentConfig::defaults(TestKind::Scalability);
        c.mesh = MeshKind::Cube;
        c.references = vec!["3".into()];
        c.subdomains = vec![1];
        c.variants = vec![Variant::VE];
        let rows = run_test1(&c).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!((rows[0].kappa, rows[0].iters, rows[0].primal), (1.0, 0, 0));
        assert_eq!(rows[0].dofs, 8);
    }

    #[test]
    fn small_sweep_is_deterministic() {
        let mut c = ExperimentConfig::defaults(TestKind::Scalability);
        c.mesh = MeshKind::Cube;
        c.references = vec!["2".into()];
        c.subdomains = vec![2];
        c.variants = vec![Variant::E, Variant::VE];
        c.rho = RhoSpec::Checkerboard(1e5, 1e-5);
        c.load = LoadKind::Random;
        c.tol = 1e-12;
        let a = csv_string(&run_test1(&c).unwrap()).unwrap();
        let b = csv_string(&run_test1(&c).unwrap()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.lines().count(), 3);
    }
}
