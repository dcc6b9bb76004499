use rayon::prelude::*;

use crate::dense::DenseMatrix;
use crate::dofmap::{build_connectivity, DofMap};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::scalar::Scalar;

use super::direct::direct_upper;
use super::kernels::{kernels_from_grid, p2s_upper, KernelCounts};
use super::{Backend, ConformingTransform, CouplingGrid, ElementMatrices, IntegralCounts, Orders};

const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AssemblyOptions {
    pub backend: Backend,
    /// Gauss points per direction; `None` picks [`Orders::default_quad_points`] per element.
    pub quad_points: Option<usize>,
    /// Worker threads for element-parallel filling; `0` or `1` runs serially.
    pub threads: usize,
}

impl AssemblyOptions {
    pub fn new(backend: Backend) -> Self {
        AssemblyOptions {
            backend,
            quad_points: None,
            threads: 1,
        }
    }

    pub fn with_quad_points(mut self, nq: Option<usize>) -> Self {
        self.quad_points = nq;
        self
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }
}

/// Integral counters summed over all elements.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FillCounts {
    pub direct: IntegralCounts,
    pub kernels: KernelCounts,
}

/// Assembled free-DOF stiffness and mass matrices.
#[derive(Clone, Debug)]
pub struct GlobalSystem<S> {
    pub s: DenseMatrix<S>,
    pub m: DenseMatrix<S>,
    pub dof_map: DofMap,
    pub orders: Orders,
}

impl<S: Scalar> GlobalSystem<S> {
    pub fn dim(&self) -> usize {
        self.s.rows()
    }
}

fn one_element<S: Scalar>(
    mesh: &Mesh<S>,
    elem: usize,
    orders: Orders,
    opts: &AssemblyOptions,
    transform: &ConformingTransform<S>,
) -> Result<(ElementMatrices<S>, FillCounts)> {
    let p = mesh.elements[elem].order;
    let nq = opts
        .quad_points
        .unwrap_or_else(|| orders.default_quad_points(p));
    let grid = CouplingGrid::sample(mesh, elem, nq)?;
    let mut counts = FillCounts::default();
    let mut em = match opts.backend {
        Backend::Direct => {
            let (em, c) = direct_upper(&grid, orders);
            counts.direct = c;
            em
        }
        Backend::ProductToSum => {
            let k = kernels_from_grid(&grid, orders);
            counts.kernels = k.counts;
            p2s_upper(&k, orders)
        }
    };
    transform.apply_in_place(&mut em);
    Ok((em, counts))
}

/// Conforming element matrices of every element, in element order.
pub fn element_matrices<S: Scalar>(
    mesh: &Mesh<S>,
    orders: Orders,
    opts: &AssemblyOptions,
) -> Result<(Vec<ElementMatrices<S>>, FillCounts)> {
    let transform = ConformingTransform::new(orders);
    let per_element: Vec<(ElementMatrices<S>, FillCounts)> = if opts.threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.threads)
            .build()
            .map_err(|e| Error::Usage(format!("thread pool: {e}")))?;
        pool.install(|| {
            (0..mesh.element_count())
                .into_par_iter()
                .map(|e| one_element(mesh, e, orders, opts, &transform))
                .collect::<Result<_>>()
        })?
    } else {
        (0..mesh.element_count())
            .map(|e| one_element(mesh, e, orders, opts, &transform))
            .collect::<Result<_>>()?
    };
    let mut total = FillCounts::default();
    let mut mats = Vec::with_capacity(per_element.len());
    for (em, c) in per_element {
        total.direct += c.direct;
        total.kernels.ks += c.kernels.ks;
        total.kernels.kuu += c.kernels.kuu;
        total.kernels.kuv += c.kernels.kuv;
        total.kernels.kvv += c.kernels.kvv;
        mats.push(em);
    }
    Ok((mats, total))
}

/// Scatter-adds conforming element matrices with orientation signs and
/// drops PEC-constrained rows and columns.
pub fn assemble_global<S: Scalar>(
    mesh: &Mesh<S>,
    dof_map: &DofMap,
    elements: &[ElementMatrices<S>],
) -> Result<GlobalSystem<S>> {
    if elements.len() != mesh.element_count() || dof_map.elements.len() != elements.len() {
        return Err(Error::Connectivity(format!(
            "{} element matrices for {} elements and {} DOF tables",
            elements.len(),
            mesh.element_count(),
            dof_map.elements.len()
        )));
    }
    let n = dof_map.free_count();
    let mut s = DenseMatrix::<S>::zeros(n, n);
    let mut m = DenseMatrix::zeros(n, n);
    for (em, dofs) in elements.iter().zip(&dof_map.elements) {
        if em.orders != dof_map.orders {
            return Err(Error::Connectivity(
                "element matrices and DOF map use different orders".into(),
            ));
        }
        let local: Vec<Option<(usize, S)>> = dofs
            .iter()
            .map(|d| {
                dof_map
                    .free_index(d.global)
                    .map(|g| (g, S::lit(d.sign as f64)))
            })
            .collect();
        let (ls, lm) = (em.stiffness(), em.mass());
        for (i, gi) in local.iter().enumerate() {
            let Some((gi, si)) = *gi else { continue };
            for (j, gj) in local.iter().enumerate() {
                let Some((gj, sj)) = *gj else { continue };
                let sign = si * sj;
                s[(gi, gj)] += sign * ls[(i, j)];
                m[(gi, gj)] += sign * lm[(i, j)];
            }
        }
    }
    // single precision cannot resolve 1e-10; allow a few hundred ulps there
    let tol = SYMMETRY_TOL.max(256.0 * Scalar::as_f64(S::epsilon()));
    for (name, mat) in [("stiffness", &mut s), ("mass", &mut m)] {
        let asym = Scalar::as_f64(mat.asymmetry());
        if asym > tol {
            return Err(Error::Asymmetric {
                matrix: name,
                asymmetry: asym,
            });
        }
        symmetrize(mat);
    }
    Ok(GlobalSystem {
        s,
        m,
        dof_map: dof_map.clone(),
        orders: dof_map.orders,
    })
}

/// Averages the two triangles so that dumps and solvers see exact symmetry.
fn symmetrize<S: Scalar>(a: &mut DenseMatrix<S>) {
    let half = S::lit(0.5);
    for i in 0..a.rows() {
        for j in 0..i {
            let v = half * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

/// Element filling, connectivity and global assembly in one call.
pub fn assemble_system<S: Scalar>(
    mesh: &Mesh<S>,
    orders: Orders,
    opts: &AssemblyOptions,
) -> Result<(GlobalSystem<S>, FillCounts)> {
    let dof_map = build_connectivity(mesh, orders)?;
    let (mats, counts) = element_matrices(mesh, orders, opts)?;
    Ok((assemble_global(mesh, &dof_map, &mats)?, counts))
}
