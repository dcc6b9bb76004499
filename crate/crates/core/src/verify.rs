//! Property suites behind the `verify` command.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{
    assemble_direct_element, assemble_p2s_element, assemble_system, compute_kernel_tables,
    AssemblyOptions, Backend, Orders,
};
use crate::chebyshev::{eval, eval_t, eval_tns, product_to_sum, PolyFamily};
use crate::eigen::{spectrum, DEFAULT_FILTER_TOL};
use crate::error::Result;
use crate::mesh::{generate_curved_cavity, reference_square, CurvedQuadElement, Materials, Mesh};
use crate::quadrature::gauss_legendre;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Check {
            name,
            passed,
            detail,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Random curved elements in the backend-equivalence suite.
    pub elements: usize,
    pub max_order: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: 0,
            elements: 10,
            max_order: 6,
        }
    }
}

/// Random smooth, strictly positive material pair.
pub fn random_materials(rng: &mut impl Rng) -> Materials {
    let eps = format!(
        "{:.6}+{:.6}*sin({:.6}*x+{:.6}*y+{:.6})",
        rng.gen_range(1.5..3.0),
        rng.gen_range(0.0..0.5),
        rng.gen_range(-2.0..2.0),
        rng.gen_range(-2.0..2.0),
        rng.gen_range(0.0..PI),
    );
    let mu = format!(
        "{:.6}+{:.6}*cos({:.6}*x*y+{:.6})",
        rng.gen_range(1.0..2.0),
        rng.gen_range(0.0..0.4),
        rng.gen_range(-1.5..1.5),
        rng.gen_range(0.0..PI),
    );
    Materials::parse(&eps, &mu).expect("generated materials parse")
}

/// One curved element of geometric order `p` with PEC on every edge: a
/// perturbed bilinear quad whose nodes are jittered, retried until the
/// Jacobian stays clear of zero on a dense grid including the edges.
pub fn random_curved_element(rng: &mut impl Rng, p: usize) -> Mesh<f64> {
    loop {
        let corners: Vec<[f64; 2]> = [[-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0], [1.0, 1.0]]
            .iter()
            .map(|c| {
                [
                    c[0] + rng.gen_range(-0.25..0.25),
                    c[1] + rng.gen_range(-0.25..0.25),
                ]
            })
            .collect();
        let amp = 0.3 / p as f64;
        let mut nodes = Vec::with_capacity((p + 1) * (p + 1));
        for j in 0..=p {
            let t = -1.0 + 2.0 * j as f64 / p as f64;
            for i in 0..=p {
                let s = -1.0 + 2.0 * i as f64 / p as f64;
                let w = [
                    (1.0 - s) * (1.0 - t),
                    (1.0 + s) * (1.0 - t),
                    (1.0 - s) * (1.0 + t),
                    (1.0 + s) * (1.0 + t),
                ];
                let mut xy = [0.0; 2];
                for (wk, c) in w.iter().zip(&corners) {
                    xy[0] += 0.25 * wk * c[0];
                    xy[1] += 0.25 * wk * c[1];
                }
                let corner = (i == 0 || i == p) && (j == 0 || j == p);
                if p > 1 && !corner {
                    xy[0] += rng.gen_range(-amp..amp);
                    xy[1] += rng.gen_range(-amp..amp);
                }
                nodes.push(xy);
            }
        }
        let mesh = Mesh {
            nodes,
            elements: vec![CurvedQuadElement {
                order: p,
                nodes: (0..(p + 1) * (p + 1)).collect(),
            }],
            boundary_edges: (0..4).map(|k| (0, k)).collect::<BTreeSet<_>>(),
            materials: random_materials(rng),
        };
        let grid = sample_points(33);
        let clear = mesh
            .sample_grid(0, &grid, &grid)
            .iter()
            .all(|s| s.jac > 0.05);
        if clear && mesh.validate().is_ok() {
            return mesh;
        }
    }
}

/// Sample points in `[-1, 1]` including both endpoints.
fn sample_points(count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| -1.0 + 2.0 * i as f64 / (count - 1) as f64)
        .collect()
}

pub fn check_identities(max_degree: usize) -> Check {
    use PolyFamily::{T, U};
    let pts = sample_points(100);
    let mut worst: f64 = 0.0;
    for (fa, fb) in [(T, T), (U, U), (U, T), (T, U)] {
        for a in 0..=max_degree {
            for b in 0..=max_degree {
                let e = product_to_sum::<f64>(fa, a, fb, b).expect("T/U pair");
                for &u in &pts {
                    let want = eval(fa, a, u) * eval(fb, b, u);
                    worst = worst.max((e.eval(u) - want).abs());
                }
            }
        }
    }
    let tns_worst = (0..=2 * max_degree)
        .flat_map(|n| pts.iter().map(move |&u| (n, u)))
        .map(|(n, u)| {
            let rebuilt = eval_t(n % 2, u) + 2.0 * (1.0 - u * u) * eval_tns(n, u);
            (rebuilt - eval_t(n, u)).abs()
        })
        .fold(0.0, f64::max);
    Check::new(
        "product-to-sum identities",
        worst <= 1e-12 && tns_worst <= 1e-10,
        format!("max pointwise error {worst:.2e}, Tns reconstruction {tns_worst:.2e}"),
    )
}

pub fn check_quadrature() -> Check {
    let mut worst: f64 = 0.0;
    for n in 1..=32 {
        let rule = gauss_legendre::<f64>(n);
        for k in 0..2 * n {
            let got = rule.integrate(|x| x.powi(k as i32));
            let want = if k % 2 == 1 {
                0.0
            } else {
                2.0 / (k + 1) as f64
            };
            worst = worst.max((got - want).abs());
        }
    }
    Check::new(
        "Gauss-Legendre exactness",
        worst <= 1e-13,
        format!("max error {worst:.2e}"),
    )
}

pub fn check_backend_equivalence(cfg: &VerifyConfig) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cfg.elements {
        let p = rng.gen_range(1..=4);
        let mesh = random_curved_element(&mut rng, p);
        for k in 1..=cfg.max_order {
            let o = Orders::square(k)?;
            let nq = o.default_quad_points(p);
            let (direct, _) = assemble_direct_element(&mesh, 0, o, nq)?;
            let p2s = assemble_p2s_element(&compute_kernel_tables(&mesh, 0, o, nq)?, o);
            worst = worst.max(direct.max_relative_difference(&p2s));
        }
    }
    Ok(Check::new(
        "backend equivalence on random curved elements",
        worst <= 1e-10,
        format!(
            "{} elements, orders 1..={}, max relative difference {worst:.2e}",
            cfg.elements, cfg.max_order
        ),
    ))
}

pub fn check_square_cavity() -> Result<Check> {
    let mesh = reference_square::<f64>(1, Materials::homogeneous(1.0, 1.0));
    let o = Orders::square(8)?;
    let (sys, _) = assemble_system(&mesh, o, &AssemblyOptions::new(Backend::ProductToSum))?;
    let sp = spectrum(&sys, DEFAULT_FILTER_TOL)?;
    let want = (PI / 2.0).powi(2);
    let err = (sp.eigenvalues[0] - want).abs() / want;
    let double = (sp.eigenvalues[1] - want).abs() / want <= 1e-6
        && (sp.eigenvalues[2] - want).abs() / want > 1e-2;
    Ok(Check::new(
        "analytic square cavity",
        err <= 1e-6 && double && sp.nullspace_count == 49,
        format!(
            "lowest {:.10}, relative error {err:.2e}, nullspace {}",
            sp.eigenvalues[0], sp.nullspace_count
        ),
    ))
}

pub fn check_parallel_determinism() -> Result<Check> {
    let mesh = generate_curved_cavity::<f64>(4, 4, 4)?;
    let o = Orders::square(4)?;
    let opts = AssemblyOptions::new(Backend::ProductToSum);
    let (serial, _) = assemble_system(&mesh, o, &opts)?;
    let (parallel, _) = assemble_system(&mesh, o, &opts.with_threads(4))?;
    let diff = serial
        .s
        .as_slice()
        .iter()
        .zip(parallel.s.as_slice())
        .chain(serial.m.as_slice().iter().zip(parallel.m.as_slice()))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(Check::new(
        "parallel assembly matches serial",
        diff <= 1e-12,
        format!("max entry difference {diff:.2e}"),
    ))
}

pub fn check_symmetry_and_definiteness() -> Result<Check> {
    let mesh = generate_curved_cavity::<f64>(4, 4, 4)?;
    let o = Orders::square(3)?;
    let (sys, _) = assemble_system(&mesh, o, &AssemblyOptions::new(Backend::Direct))?;
    let asym = sys.s.asymmetry().max(sys.m.asymmetry());
    let chol = crate::eigen::cholesky(&sys.m).is_ok();
    Ok(Check::new(
        "global matrices symmetric, mass positive definite",
        asym <= 1e-10 && chol,
        format!(
            "asymmetry {asym:.2e}, Cholesky {}",
            if chol { "ok" } else { "failed" }
        ),
    ))
}

/// Runs every suite; a suite that errors out counts as a failed check.
pub fn run_all(cfg: &VerifyConfig) -> Vec<Check> {
    type Suite = fn(&VerifyConfig) -> Result<Check>;
    let fallible: [(&'static str, Suite); 4] = [
        (
            "backend equivalence on random curved elements",
            check_backend_equivalence,
        ),
        ("analytic square cavity", |_| check_square_cavity()),
        ("global matrices symmetric, mass positive definite", |_| {
            check_symmetry_and_definiteness()
        }),
        ("parallel assembly matches serial", |_| {
            check_parallel_determinism()
        }),
    ];
    let mut out = vec![check_identities(20), check_quadrature()];
    for (name, f) in fallible {
        out.push(f(cfg).unwrap_or_else(|e| Check::new(name, false, e.to_string())));
    }
    out
}
