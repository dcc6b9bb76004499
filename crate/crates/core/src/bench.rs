//! Cost model, timing harness and convergence reports.

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use crate::assembly::global::{element_matrices, FillCounts};
use crate::assembly::{assemble_global, AssemblyOptions, Backend, Orders};
use crate::dense::DenseMatrix;
use crate::dofmap::build_connectivity;
use crate::eigen::{spectrum, Spectrum, DEFAULT_FILTER_TOL};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::scalar::Scalar;

/// Predicted fill-time reduction of the product-to-sum backend, `MN / 15`.
pub fn predicted_reduction(orders: Orders) -> f64 {
    orders.d() as f64 / 15.0
}

/// Model count of distinct 2-D integrals for one mass block.
///
/// Direct: `ceil(D^2 / 4)` with four-fold symmetry. Product-to-sum: one
/// kernel table of `(2M+1)(2N+1)` entries.
pub fn integral_count(orders: Orders, backend: Backend) -> u64 {
    let d = orders.d() as u64;
    match backend {
        Backend::Direct => (d * d).div_ceil(4),
        Backend::ProductToSum => ((2 * orders.m + 1) * (2 * orders.n + 1)) as u64,
    }
}

/// Large-order approximation of the kernel table size, `4D`.
pub fn asymptotic_p2s_count(orders: Orders) -> u64 {
    4 * orders.d() as u64
}

/// `D / 16`, the predicted ratio of direct to product-to-sum integral counts.
pub fn predicted_count_ratio(orders: Orders) -> f64 {
    orders.d() as f64 / 16.0
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub orders: Vec<Orders>,
    pub reps: usize,
    /// Include assembly and the eigensolve in a "total" time.
    pub solve: bool,
    /// Gauss points per direction for both backends; `None` uses about `2D`
    /// sample points per integral.
    pub quad_points: Option<usize>,
    pub threads: usize,
    pub filter_tol: f64,
}

impl BenchConfig {
    pub fn new(orders: Vec<Orders>) -> Self {
        BenchConfig {
            orders,
            reps: 3,
            solve: false,
            quad_points: None,
            threads: 1,
            filter_tol: DEFAULT_FILTER_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub orders: Orders,
    pub fill_time_direct: f64,
    pub fill_time_p2s: f64,
    pub total_time_direct: Option<f64>,
    pub total_time_p2s: Option<f64>,
    pub measured_reduction: f64,
    pub predicted_reduction: f64,
    /// Instrumented 2-D integrals over the whole mesh.
    pub direct_integral_count: u64,
    pub p2s_integral_count: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite timings"));
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

struct Timed {
    fill: f64,
    total: Option<f64>,
    counts: FillCounts,
}

fn time_once<S: Scalar>(
    mesh: &Mesh<S>,
    orders: Orders,
    opts: &AssemblyOptions,
    cfg: &BenchConfig,
) -> Result<Timed> {
    let start = Instant::now();
    let (mats, counts) = element_matrices(mesh, orders, opts)?;
    let fill = start.elapsed().as_secs_f64();
    let total = if cfg.solve {
        let map = build_connectivity(mesh, orders)?;
        let sys = assemble_global(mesh, &map, &mats)?;
        spectrum(&sys, S::lit(cfg.filter_tol))?;
        Some(start.elapsed().as_secs_f64())
    } else {
        None
    };
    Ok(Timed {
        fill,
        total,
        counts,
    })
}

/// Times both backends, alternating them within every repetition so that
/// slow stretches of the machine hit both sides of the ratio.
fn time_backends<S: Scalar>(
    mesh: &Mesh<S>,
    orders: Orders,
    cfg: &BenchConfig,
) -> Result<[Timed; 2]> {
    let nq = cfg.quad_points.unwrap_or_else(|| orders.lean_quad_points());
    let opts = [Backend::Direct, Backend::ProductToSum].map(|b| {
        AssemblyOptions::new(b)
            .with_quad_points(Some(nq))
            .with_threads(cfg.threads)
    });
    // warm-up, discarded
    let mut counts = Vec::with_capacity(2);
    for o in &opts {
        counts.push(time_once(mesh, orders, o, cfg)?.counts);
    }
    let mut fills = [Vec::with_capacity(cfg.reps), Vec::with_capacity(cfg.reps)];
    let mut totals = [Vec::with_capacity(cfg.reps), Vec::with_capacity(cfg.reps)];
    for _ in 0..cfg.reps {
        for k in 0..2 {
            let t = time_once(mesh, orders, &opts[k], cfg)?;
            fills[k].push(t.fill);
            totals[k].extend(t.total);
        }
    }
    let mut out = fills
        .into_iter()
        .zip(totals)
        .zip(counts)
        .map(|((f, t), counts)| Timed {
            fill: median(f),
            total: (!t.is_empty()).then(|| median(t)),
            counts,
        });
    Ok([
        out.next().expect("two backends"),
        out.next().expect("two backends"),
    ])
}

/// Times element filling with both backends for every order in `cfg`.
pub fn bench_fill<S: Scalar>(mesh: &Mesh<S>, cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.reps == 0 {
        return Err(Error::Usage("bench needs at least one repetition".into()));
    }
    let mut rows = Vec::with_capacity(cfg.orders.len());
    for &orders in &cfg.orders {
        let [direct, p2s] = time_backends(mesh, orders, cfg)?;
        rows.push(BenchRow {
            orders,
            fill_time_direct: direct.fill,
            fill_time_p2s: p2s.fill,
            total_time_direct: direct.total,
            total_time_p2s: p2s.total,
            measured_reduction: direct.fill / p2s.fill,
            predicted_reduction: predicted_reduction(orders),
            direct_integral_count: direct.counts.direct.total(),
            p2s_integral_count: p2s.counts.kernels.total(),
        });
    }
    Ok(BenchReport { rows })
}

fn opt_time(t: Option<f64>) -> String {
    t.map(|t| format!("{t:.6}")).unwrap_or_default()
}

impl BenchReport {
    /// CSV with one row per order. With `timings == false` every
    /// clock-derived column is left out, which makes the output reproducible.
    pub fn to_csv(&self, timings: bool) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["M", "N"];
        if timings {
            header.extend([
                "fill_time_direct_s",
                "fill_time_p2s_s",
                "total_time_direct_s",
                "total_time_p2s_s",
                "measured_reduction",
            ]);
        }
        header.extend([
            "predicted_reduction",
            "direct_integral_count",
            "p2s_integral_count",
        ]);
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.orders.m.to_string(), r.orders.n.to_string()];
            if timings {
                rec.extend([
                    format!("{:.6}", r.fill_time_direct),
                    format!("{:.6}", r.fill_time_p2s),
                    opt_time(r.total_time_direct),
                    opt_time(r.total_time_p2s),
                    format!("{:.4}", r.measured_reduction),
                ]);
            }
            rec.extend([
                format!("{:.16e}", r.predicted_reduction),
                r.direct_integral_count.to_string(),
                r.p2s_integral_count.to_string(),
            ]);
            w.write_record(&rec)?;
        }
        csv_string(w)
    }

    /// Markdown table with the column layout of the published timing table.
    pub fn to_markdown(&self) -> String {
        let mut out = String::from(
            "| Orders | p2s fill (s) | p2s total (s) | direct fill (s) | direct total (s) | reduction (measured) | reduction (predicted) |\n\
             |---|---|---|---|---|---|---|\n",
        );
        for r in &self.rows {
            let o = r.orders;
            let label = if o.m == o.n {
                format!("M = N = {}", o.m)
            } else {
                format!("M = {}, N = {}", o.m, o.n)
            };
            let total = |t: Option<f64>| t.map(|t| format!("{t:.3}")).unwrap_or_else(|| "-".into());
            out.push_str(&format!(
                "| {label} | {:.4} | {} | {:.4} | {} | {:.2} | {:.2} |\n",
                r.fill_time_p2s,
                total(r.total_time_p2s),
                r.fill_time_direct,
                total(r.total_time_direct),
                r.measured_reduction,
                r.predicted_reduction,
            ));
        }
        out
    }
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Cavity eigenvalues of the PEC square `[-1, 1]^2` in vacuum, ascending:
/// `(pi/2)^2 (m^2 + n^2)` over `m, n >= 0`, not both zero.
pub fn square_cavity_eigenvalues(count: usize) -> Vec<f64> {
    let reach = (count as f64).sqrt().ceil() as usize + 2;
    let mut all: Vec<(usize, f64)> = Vec::new();
    for m in 0..=reach {
        for n in 0..=reach {
            if m + n > 0 {
                all.push((m * m + n * n, (PI / 2.0).powi(2) * (m * m + n * n) as f64));
            }
        }
    }
    all.sort_by_key(|&(k, _)| k);
    all.into_iter().take(count).map(|(_, v)| v).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub enum Reference {
    Analytic(Vec<f64>),
    /// Spectrum of the same mesh at higher orders.
    SelfReference(Orders),
}

#[derive(Clone, Debug)]
pub struct ConvergenceConfig {
    pub orders: Vec<Orders>,
    /// Backend whose eigenvalues are compared with the reference.
    pub backend: Backend,
    pub reference: Reference,
    pub modes: usize,
    pub quad_points: Option<usize>,
    pub threads: usize,
    pub filter_tol: f64,
}

impl ConvergenceConfig {
    pub fn new(orders: Vec<Orders>, reference: Reference) -> Self {
        ConvergenceConfig {
            orders,
            backend: Backend::ProductToSum,
            reference,
            modes: 5,
            quad_points: None,
            threads: 1,
            filter_tol: DEFAULT_FILTER_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub orders: Orders,
    /// 1-based position in the retained spectrum.
    pub mode: usize,
    pub p2s: f64,
    pub direct: f64,
    pub backend_rel_diff: f64,
    pub reference: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
}

fn solve_with<S: Scalar>(
    mesh: &Mesh<S>,
    orders: Orders,
    backend: Backend,
    cfg: &ConvergenceConfig,
) -> Result<Spectrum<S>> {
    let opts = AssemblyOptions::new(backend)
        .with_quad_points(cfg.quad_points)
        .with_threads(cfg.threads);
    let (sys, _) = crate::assembly::assemble_system(mesh, orders, &opts)?;
    spectrum(&sys, S::lit(cfg.filter_tol))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Lowest eigenvalues per order from both backends, their agreement, and
/// the error of `cfg.backend` against the reference.
pub fn run_convergence<S: Scalar>(
    mesh: &Mesh<S>,
    cfg: &ConvergenceConfig,
) -> Result<ConvergenceReport> {
    if cfg.orders.is_empty() {
        return Err(Error::Usage("convergence needs at least one order".into()));
    }
    if cfg
        .orders
        .windows(2)
        .any(|w| w[1].m < w[0].m || w[1].n < w[0].n)
    {
        return Err(Error::Usage("convergence orders must be ascending".into()));
    }
    let reference: Vec<f64> = match &cfg.reference {
        Reference::Analytic(v) => v.clone(),
        Reference::SelfReference(o) => solve_with(mesh, *o, cfg.backend, cfg)?
            .lowest(cfg.modes)
            .iter()
            .map(|x| x.as_f64())
            .collect(),
    };
    let mut rows = Vec::new();
    for &orders in &cfg.orders {
        let p2s = solve_with(mesh, orders, Backend::ProductToSum, cfg)?;
        let direct = solve_with(mesh, orders, Backend::Direct, cfg)?;
        let tracked = cfg
            .modes
            .min(p2s.eigenvalues.len())
            .min(direct.eigenvalues.len())
            .min(reference.len());
        for k in 0..tracked {
            let (a, b) = (p2s.eigenvalues[k].as_f64(), direct.eigenvalues[k].as_f64());
            let own = match cfg.backend {
                Backend::ProductToSum => a,
                Backend::Direct => b,
            };
            rows.push(ConvergenceRow {
                orders,
                mode: k + 1,
                p2s: a,
                direct: b,
                backend_rel_diff: rel(a, b),
                reference: reference[k],
                rel_error: rel(own, reference[k]),
            });
        }
    }
    Ok(ConvergenceReport { rows })
}

impl ConvergenceReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "M",
            "N",
            "mode",
            "p2s",
            "direct",
            "backend_rel_diff",
            "reference",
            "rel_error",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.orders.m.to_string(),
                r.orders.n.to_string(),
                r.mode.to_string(),
                format!("{:.16e}", r.p2s),
                format!("{:.16e}", r.direct),
                format!("{:.16e}", r.backend_rel_diff),
                format!("{:.16e}", r.reference),
                format!("{:.16e}", r.rel_error),
            ])?;
        }
        csv_string(w)
    }
}

/// Retained eigenvalues as CSV (`mode,eigenvalue`).
pub fn spectrum_csv<S: Scalar>(sp: &Spectrum<S>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["mode", "eigenvalue"])?;
    for (k, v) in sp.eigenvalues.iter().enumerate() {
        w.write_record([(k + 1).to_string(), format!("{:.16e}", v.as_f64())])?;
    }
    csv_string(w)
}

/// Nonzero entries as `i j value` lines, 0-based, 17 significant digits.
pub fn write_matrix_triplets<S: Scalar>(out: &mut impl Write, a: &DenseMatrix<S>) -> Result<()> {
    for i in 0..a.rows() {
        for (j, &v) in a.row(i).iter().enumerate() {
            if v != S::zero() {
                writeln!(out, "{i} {j} {:.16e}", v.as_f64())?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_domain, reference_square, DomainSpec, Materials};

    #[test]
    fn predicted_values() {
        assert_eq!(predicted_reduction(Orders::square(3).unwrap()), 0.6);
        assert!((predicted_reduction(Orders::square(8).unwrap()) - 64.0 / 15.0).abs() < 1e-15);
        assert!((predicted_reduction(Orders::square(14).unwrap()) - 196.0 / 15.0).abs() < 1e-15);
    }

    #[test]
    fn model_counts() {
        let o8 = Orders::square(8).unwrap();
        assert_eq!(integral_count(o8, Backend::Direct), 1024);
        assert_eq!(integral_count(o8, Backend::ProductToSum), 289);
        assert_eq!(asymptotic_p2s_count(o8), 256);
        assert_eq!(
            integral_count(Orders::square(1).unwrap(), Backend::Direct),
            1
        );
        assert_eq!(
            integral_count(Orders::new(3, 1).unwrap(), Backend::Direct),
            3
        );
    }

    #[test]
    fn zero_reps_is_usage_error() {
        let mesh = reference_square::<f64>(1, Materials::homogeneous(1.0, 1.0));
        let mut cfg = BenchConfig::new(vec![Orders::square(2).unwrap()]);
        cfg.reps = 0;
        assert!(matches!(bench_fill(&mesh, &cfg), Err(Error::Usage(_))));
    }

    #[test]
    fn bench_report_shape() {
        let mesh = generate_domain::<f64>(&DomainSpec::square(), 2, 1, 1).unwrap();
        let mut cfg =
            BenchConfig::new(vec![Orders::square(2).unwrap(), Orders::square(3).unwrap()]);
        cfg.reps = 1;
        cfg.solve = true;
        let rep = bench_fill(&mesh, &cfg).unwrap();
        assert_eq!(rep.rows.len(), 2);
        assert!(rep
            .rows
            .iter()
            .all(|r| r.total_time_p2s.is_some() && r.fill_time_direct > 0.0));
        let csv = rep.to_csv(true).unwrap();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("M,N,fill_time_direct_s"));
        let md = rep.to_markdown();
        assert!(md.contains("| M = N = 3 |"));
        // kernel tables: 3 of (2M+1)^2 and one of (2M)^2 per element
        assert_eq!(rep.rows[0].p2s_integral_count, 2 * (3 * 25 + 16));
    }

    #[test]
    fn square_reference_values() {
        let v = square_cavity_eigenvalues(6);
        let q = (PI / 2.0).powi(2);
        assert_eq!(v, vec![q, q, 2.0 * q, 4.0 * q, 4.0 * q, 5.0 * q]);
    }

    #[test]
    fn convergence_rows_track_available_modes() {
        let mesh = reference_square::<f64>(1, Materials::homogeneous(1.0, 1.0));
        let cfg = ConvergenceConfig::new(
            vec![Orders::square(2).unwrap()],
            Reference::Analytic(square_cavity_eigenvalues(5)),
        );
        let rep = run_convergence(&mesh, &cfg).unwrap();
        // 4 free DOFs minus one gradient leaves three modes
        assert_eq!(rep.rows.len(), 3);
        let unsorted = ConvergenceConfig::new(
            vec![Orders::square(3).unwrap(), Orders::square(2).unwrap()],
            Reference::Analytic(vec![1.0]),
        );
        assert!(run_convergence(&mesh, &unsorted).is_err());
    }

    #[test]
    fn triplets_format() {
        let a = DenseMatrix::from_fn(2, 2, |i, j| if i == j { 1.5 } else { 0.0 });
        let mut buf = Vec::new();
        write_matrix_triplets(&mut buf, &a).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "0 0 1.5000000000000000e0\n1 1 1.5000000000000000e0\n"
        );
    }
}
