use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use chebfill::assembly::global::FillCounts;
use chebfill::bench::{
    bench_fill, run_convergence, spectrum_csv, square_cavity_eigenvalues, write_matrix_triplets,
    BenchConfig, ConvergenceConfig, Reference,
};
use chebfill::verify::{run_all, VerifyConfig};
use chebfill::{assemble_system, load_mesh, AssemblyOptions, Backend, DomainSpec, Mesh64, Orders};

#[derive(Parser, Debug)]
#[command(
    name = "chebfill",
    version,
    about = "Chebyshev vector finite elements for 2-D cavity eigenproblems"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Matrix filling backend
    #[arg(long, global = true, value_enum, default_value_t = BackendArg::P2s)]
    backend: BackendArg,
    /// Expansion orders as `M,N` or a single `K` for `M = N = K`
    #[arg(long, global = true, default_value = "4", value_parser = parse_orders)]
    orders: Orders,
    /// Gauss points per direction (default depends on orders and geometry)
    #[arg(long, global = true)]
    quad_points: Option<usize>,
    /// Mesh file; the built-in curved cavity (4x4 order-4 elements) otherwise
    #[arg(long, global = true)]
    mesh: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Seed for randomized checks
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Relative threshold separating the gradient nullspace
    #[arg(long, global = true, default_value_t = chebfill::eigen::DEFAULT_FILTER_TOL)]
    filter_tol: f64,
    /// Worker threads for element filling
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BackendArg {
    Direct,
    P2s,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Direct => Backend::Direct,
            BackendArg::P2s => Backend::ProductToSum,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Domain {
    /// Curved boundaries with graded permittivity
    Curved,
    /// The square [-1, 1]^2 in vacuum
    Square,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ReferenceKind {
    /// Closed-form eigenvalues of the square cavity
    Analytic,
    /// A higher-order run on the same mesh
    SelfRef,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a structured mesh and write it as JSON
    MeshGen {
        #[arg(long, value_enum, default_value_t = Domain::Curved)]
        domain: Domain,
        #[arg(long, default_value_t = 4)]
        nx: usize,
        #[arg(long, default_value_t = 4)]
        ny: usize,
        /// Geometric order of the elements
        #[arg(long, default_value_t = 4)]
        order: usize,
    },
    /// Assemble global stiffness and mass and dump them as `i j value`
    Assemble,
    /// Solve the cavity eigenproblem
    Solve {
        /// Eigenvalues printed to the terminal
        #[arg(long, default_value_t = 5)]
        show: usize,
    },
    /// Time element filling with both backends
    Bench {
        /// Orders to sweep (`M = N`)
        #[arg(long, value_delimiter = ',', default_values_t = [3, 4, 6, 8, 10, 12])]
        sweep: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        /// Also time connectivity, global assembly and the eigensolve
        #[arg(long)]
        solve: bool,
    },
    /// Eigenvalue convergence with both backends
    Convergence {
        /// Orders to sweep (`M = N`), ascending
        #[arg(long, value_delimiter = ',', default_values_t = [2, 3, 4, 5, 6])]
        sweep: Vec<usize>,
        #[arg(long, value_enum, default_value_t = ReferenceKind::SelfRef)]
        reference: ReferenceKind,
        /// Order of the self-reference run (`M = N`)
        #[arg(long, default_value_t = 8)]
        reference_order: usize,
        #[arg(long, default_value_t = 5)]
        modes: usize,
    },
    /// Run the property suites; exits with status 2 on failure
    Verify {
        /// Random curved elements in the backend check
        #[arg(long, default_value_t = 10)]
        elements: usize,
        #[arg(long, default_value_t = 6)]
        max_order: usize,
    },
}

fn parse_orders(s: &str) -> Result<Orders, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |p: &str| {
        p.parse::<usize>()
            .map_err(|e| format!("bad order '{p}': {e}"))
    };
    let (m, n) = match parts[..] {
        [k] => (num(k)?, num(k)?),
        [m, n] => (num(m)?, num(n)?),
        _ => return Err(format!("expected M,N or K, got '{s}'")),
    };
    Orders::new(m, n).map_err(|e| e.to_string())
}

fn load(global: &Global) -> anyhow::Result<Mesh64> {
    match &global.mesh {
        Some(path) => {
            let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            Ok(load_mesh(&bytes).with_context(|| format!("loading {}", path.display()))?)
        }
        None => Ok(chebfill::generate_curved_cavity(4, 4, 4)?),
    }
}

fn options(global: &Global) -> AssemblyOptions {
    AssemblyOptions::new(global.backend.into())
        .with_quad_points(global.quad_points)
        .with_threads(global.threads)
}

fn out_file(dir: &Path, name: &str) -> anyhow::Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir.join(name))
}

fn write(dir: &Path, name: &str, contents: &str) -> anyhow::Result<PathBuf> {
    let path = out_file(dir, name)?;
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn report_counts(counts: &FillCounts) {
    if counts.direct.total() > 0 {
        println!("direct 2-D integrals: {}", counts.direct.total());
    }
    if counts.kernels.total() > 0 {
        println!("kernel integrals: {}", counts.kernels.total());
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let g = &cli.global;
    match cli.command {
        Command::MeshGen {
            domain,
            nx,
            ny,
            order,
        } => {
            let spec = match domain {
                Domain::Curved => DomainSpec::curved_cavity(),
                Domain::Square => DomainSpec::square(),
            };
            let mesh: Mesh64 = chebfill::generate_domain(&spec, nx, ny, order)?;
            let path = write(&g.out, "mesh.json", &mesh.to_json()?)?;
            println!(
                "{} elements of order {order} -> {}",
                mesh.element_count(),
                path.display()
            );
        }
        Command::Assemble => {
            let mesh = load(g)?;
            let (sys, counts) = assemble_system(&mesh, g.orders, &options(g))?;
            for (name, mat) in [("stiffness.txt", &sys.s), ("mass.txt", &sys.m)] {
                let path = out_file(&g.out, name)?;
                let mut w = BufWriter::new(File::create(&path)?);
                write_matrix_triplets(&mut w, mat)?;
            }
            println!(
                "{} free DOFs ({}, backend {})",
                sys.dim(),
                g.orders,
                Backend::from(g.backend)
            );
            report_counts(&counts);
        }
        Command::Solve { show } => {
            let mesh = load(g)?;
            let (sys, _) = assemble_system(&mesh, g.orders, &options(g))?;
            let sp = chebfill::spectrum(&sys, g.filter_tol)?;
            let path = write(&g.out, "eigenvalues.csv", &spectrum_csv(&sp)?)?;
            println!(
                "{} free DOFs, {} retained eigenvalues, nullspace {}",
                sys.dim(),
                sp.eigenvalues.len(),
                sp.nullspace_count
            );
            for (k, v) in sp.lowest(show).iter().enumerate() {
                println!("k0^2[{}] = {v:.12}", k + 1);
            }
            println!("-> {}", path.display());
        }
        Command::Bench { sweep, reps, solve } => {
            let mesh = load(g)?;
            let orders = sweep
                .iter()
                .map(|&k| Orders::square(k))
                .collect::<Result<Vec<_>, _>>()?;
            let mut cfg = BenchConfig::new(orders);
            cfg.reps = reps;
            cfg.solve = solve;
            cfg.quad_points = g.quad_points;
            cfg.threads = g.threads;
            cfg.filter_tol = g.filter_tol;
            let report = bench_fill(&mesh, &cfg)?;
            write(&g.out, "bench.csv", &report.to_csv(true)?)?;
            write(&g.out, "bench.md", &report.to_markdown())?;
            print!("{}", report.to_markdown());
        }
        Command::Convergence {
            sweep,
            reference,
            reference_order,
            modes,
        } => {
            let orders = sweep
                .iter()
                .map(|&k| Orders::square(k))
                .collect::<Result<Vec<_>, _>>()?;
            let reference = match reference {
                ReferenceKind::Analytic => {
                    if g.mesh.is_some() {
                        bail!("the analytic reference only applies to the square cavity");
                    }
                    Reference::Analytic(square_cavity_eigenvalues(modes))
                }
                ReferenceKind::SelfRef => {
                    Reference::SelfReference(Orders::square(reference_order)?)
                }
            };
            let mesh = match reference {
                Reference::Analytic(_) => {
                    chebfill::generate_domain(&DomainSpec::square(), 1, 1, 1)?
                }
                Reference::SelfReference(_) => load(g)?,
            };
            let mut cfg = ConvergenceConfig::new(orders, reference);
            cfg.backend = g.backend.into();
            cfg.modes = modes;
            cfg.quad_points = g.quad_points;
            cfg.threads = g.threads;
            cfg.filter_tol = g.filter_tol;
            let report = run_convergence(&mesh, &cfg)?;
            let path = write(&g.out, "convergence.csv", &report.to_csv()?)?;
            for r in &report.rows {
                println!(
                    "{}  mode {}  k0^2 = {:.12}  error {:.3e}  backend diff {:.1e}",
                    r.orders, r.mode, r.p2s, r.rel_error, r.backend_rel_diff
                );
            }
            println!("-> {}", path.display());
        }
        Command::Verify {
            elements,
            max_order,
        } => {
            let cfg = VerifyConfig {
                seed: g.seed,
                elements,
                max_order,
            };
            let checks = run_all(&cfg);
            for c in &checks {
                println!(
                    "{} {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
            if checks.iter().any(|c| !c.passed) {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // status 2 is reserved for failed verification
            return if e.use_stderr() {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
