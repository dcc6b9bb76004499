//! Element stiffness and mass matrices for the curl-curl operator.
//!
//! Inside each element the field is expanded in covariant components
//!
//! ```text
//! E_u = U_m(u) T_n(v),   m in [0, M),  n in [0, N]
//! E_v = T_m(u) U_n(v),   m in [0, M],  n in [0, N)
//! ```
//!
//! and the Galerkin blocks are integrated over the reference square with
//! the coupling factors
//!
//! ```text
//! stiffness:  1 / (mu_r J)
//! mass uu:    eps_r (x_v^2 + y_v^2) / J
//! mass uv:   -eps_r (x_u x_v + y_u y_v) / J
//! mass vv:    eps_r (x_u^2 + y_u^2) / J
//! ```
//!
//! Two interchangeable backends fill the blocks: [`direct`] integrates every
//! entry with a full tensor quadrature, [`kernels`] integrates one kernel
//! table per coupling factor and recombines entries with the Chebyshev
//! product-to-sum identities.

pub mod conform;
pub mod direct;
pub mod global;
pub mod kernels;

use std::fmt;
use std::str::FromStr;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::quadrature::TensorRule;
use crate::scalar::Scalar;

pub use conform::ConformingTransform;
pub use direct::assemble_direct_element;
pub use global::{assemble_global, assemble_system, AssemblyOptions, GlobalSystem};
pub use kernels::{assemble_p2s_element, compute_kernel_tables, KernelTable};

/// Expansion orders of the vector basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Orders {
    pub m: usize,
    pub n: usize,
}

impl Orders {
    pub fn new(m: usize, n: usize) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::Usage(format!(
                "orders must be positive, got M={m}, N={n}"
            )));
        }
        Ok(Orders { m, n })
    }

    pub fn square(k: usize) -> Result<Self> {
        Self::new(k, k)
    }

    /// `D = M N`.
    pub fn d(&self) -> usize {
        self.m * self.n
    }

    /// Number of `E_u` functions, `M (N + 1)`.
    pub fn u_len(&self) -> usize {
        self.m * (self.n + 1)
    }

    /// Number of `E_v` functions, `(M + 1) N`.
    pub fn v_len(&self) -> usize {
        (self.m + 1) * self.n
    }

    pub fn local_len(&self) -> usize {
        self.u_len() + self.v_len()
    }

    /// Flat index of `E_u` mode `(m, n)`.
    #[inline]
    pub fn u_index(&self, m: usize, n: usize) -> usize {
        m * (self.n + 1) + n
    }

    /// Flat index of `E_v` mode `(m, n)`, relative to the start of the `E_v` block.
    #[inline]
    pub fn v_index(&self, m: usize, n: usize) -> usize {
        m * self.n + n
    }

    /// Default per-direction Gauss point count for geometric order `p`.
    pub fn default_quad_points(&self, p: usize) -> usize {
        self.m.max(self.n) + p + 6
    }

    /// Per-direction point count giving about `2D` samples per 2-D integral.
    pub fn lean_quad_points(&self) -> usize {
        ((2 * self.d()) as f64).sqrt().ceil() as usize
    }
}

impl fmt::Display for Orders {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "M={}, N={}", self.m, self.n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Backend {
    /// One full tensor quadrature per matrix entry.
    Direct,
    /// Kernel tables recombined by product-to-sum identities.
    ProductToSum,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Direct => "direct",
            Backend::ProductToSum => "p2s",
        })
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Backend::Direct),
            "p2s" | "product-to-sum" => Ok(Backend::ProductToSum),
            other => Err(Error::Usage(format!(
                "unknown backend '{other}' (expected direct or p2s)"
            ))),
        }
    }
}

/// Stiffness and mass blocks of one element. Rows index test functions,
/// columns basis functions; `*_vu` blocks are transposes of `*_uv`.
#[derive(Clone, Debug, PartialEq)]
pub struct ElementMatrices<S> {
    pub orders: Orders,
    pub s_uu: DenseMatrix<S>,
    pub s_uv: DenseMatrix<S>,
    pub s_vu: DenseMatrix<S>,
    pub s_vv: DenseMatrix<S>,
    pub m_uu: DenseMatrix<S>,
    pub m_uv: DenseMatrix<S>,
    pub m_vu: DenseMatrix<S>,
    pub m_vv: DenseMatrix<S>,
}

impl<S: Scalar> ElementMatrices<S> {
    pub fn zeros(orders: Orders) -> Self {
        let (nu, nv) = (orders.u_len(), orders.v_len());
        ElementMatrices {
            orders,
            s_uu: DenseMatrix::zeros(nu, nu),
            s_uv: DenseMatrix::zeros(nu, nv),
            s_vu: DenseMatrix::zeros(nv, nu),
            s_vv: DenseMatrix::zeros(nv, nv),
            m_uu: DenseMatrix::zeros(nu, nu),
            m_uv: DenseMatrix::zeros(nu, nv),
            m_vu: DenseMatrix::zeros(nv, nu),
            m_vv: DenseMatrix::zeros(nv, nv),
        }
    }

    /// Like [`zeros`](Self::zeros) but with empty `*_vu` blocks, to be
    /// filled by [`fill_transposes`](Self::fill_transposes).
    pub(crate) fn zeros_upper(orders: Orders) -> Self {
        let (nu, nv) = (orders.u_len(), orders.v_len());
        ElementMatrices {
            orders,
            s_uu: DenseMatrix::zeros(nu, nu),
            s_uv: DenseMatrix::zeros(nu, nv),
            s_vu: DenseMatrix::zeros(0, 0),
            s_vv: DenseMatrix::zeros(nv, nv),
            m_uu: DenseMatrix::zeros(nu, nu),
            m_uv: DenseMatrix::zeros(nu, nv),
            m_vu: DenseMatrix::zeros(0, 0),
            m_vv: DenseMatrix::zeros(nv, nv),
        }
    }

    pub fn blocks(&self) -> [(&'static str, &DenseMatrix<S>); 8] {
        [
            ("S_uu", &self.s_uu),
            ("S_uv", &self.s_uv),
            ("S_vu", &self.s_vu),
            ("S_vv", &self.s_vv),
            ("M_uu", &self.m_uu),
            ("M_uv", &self.m_uv),
            ("M_vu", &self.m_vu),
            ("M_vv", &self.m_vv),
        ]
    }

    /// Full local stiffness matrix `[[S_uu, S_uv], [S_vu, S_vv]]`.
    pub fn stiffness(&self) -> DenseMatrix<S> {
        stack(&self.s_uu, &self.s_uv, &self.s_vu, &self.s_vv)
    }

    /// Full local mass matrix `[[M_uu, M_uv], [M_vu, M_vv]]`.
    pub fn mass(&self) -> DenseMatrix<S> {
        stack(&self.m_uu, &self.m_uv, &self.m_vu, &self.m_vv)
    }

    /// Largest entrywise difference to `other`, relative to each block's largest entry.
    pub fn max_relative_difference(&self, other: &Self) -> S {
        self.blocks()
            .iter()
            .zip(other.blocks().iter())
            .map(|((_, a), (_, b))| {
                let scale = a.max_abs().max(b.max_abs());
                let diff = a
                    .as_slice()
                    .iter()
                    .zip(b.as_slice())
                    .fold(S::zero(), |m, (&x, &y)| m.max((x - y).abs()));
                if scale == S::zero() {
                    diff
                } else {
                    diff / scale
                }
            })
            .fold(S::zero(), S::max)
    }

    pub(crate) fn fill_transposes(&mut self) {
        self.s_vu = self.s_uv.transpose();
        self.m_vu = self.m_uv.transpose();
    }
}

fn stack<S: Scalar>(
    a: &DenseMatrix<S>,
    b: &DenseMatrix<S>,
    c: &DenseMatrix<S>,
    d: &DenseMatrix<S>,
) -> DenseMatrix<S> {
    let (nu, nv) = (a.rows(), d.rows());
    DenseMatrix::from_fn(nu + nv, nu + nv, |i, j| match (i < nu, j < nu) {
        (true, true) => a[(i, j)],
        (true, false) => b[(i, j - nu)],
        (false, true) => c[(i - nu, j)],
        (false, false) => d[(i - nu, j - nu)],
    })
}

/// Coupling factors sampled on a tensor quadrature grid, weights folded in.
/// Entries are indexed `[i * nv + j]` for `u`-node `i` and `v`-node `j`.
#[derive(Clone, Debug)]
pub struct CouplingGrid<S> {
    pub rule: TensorRule<S>,
    pub stiffness: Vec<S>,
    pub mass_uu: Vec<S>,
    pub mass_uv: Vec<S>,
    pub mass_vv: Vec<S>,
}

impl<S: Scalar> CouplingGrid<S> {
    /// Samples geometry and materials of element `elem` on an `nq x nq` Gauss grid.
    pub fn sample(mesh: &Mesh<S>, elem: usize, nq: usize) -> Result<Self> {
        let rule = TensorRule::<S>::gauss(nq, nq);
        let samples = mesh.sample_grid(elem, &rule.u.nodes, &rule.v.nodes);
        let n = samples.len();
        let mut grid = CouplingGrid {
            stiffness: Vec::with_capacity(n),
            mass_uu: Vec::with_capacity(n),
            mass_uv: Vec::with_capacity(n),
            mass_vv: Vec::with_capacity(n),
            rule,
        };
        let nv = grid.rule.v.len();
        for (k, s) in samples.iter().enumerate() {
            let (i, j) = (k / nv, k % nv);
            if !(s.jac > S::zero()) {
                return Err(Error::Geometry {
                    element: elem,
                    u: grid.rule.u.nodes[i].as_f64(),
                    v: grid.rule.v.nodes[j].as_f64(),
                    jacobian: s.jac.as_f64(),
                });
            }
            let w = grid.rule.u.weights[i] * grid.rule.v.weights[j];
            let eps = mesh.materials.eps_r.eval(s.x, s.y)?;
            let mu = mesh.materials.mu_r.eval(s.x, s.y)?;
            let ej = w * eps / s.jac;
            grid.stiffness.push(w / (mu * s.jac));
            grid.mass_uu.push(ej * (s.x_v * s.x_v + s.y_v * s.y_v));
            grid.mass_uv.push(ej * (s.x_u * s.x_v + s.y_u * s.y_v));
            grid.mass_vv.push(ej * (s.x_u * s.x_u + s.y_u * s.y_u));
        }
        Ok(grid)
    }

    pub fn nu(&self) -> usize {
        self.rule.u.len()
    }

    pub fn nv(&self) -> usize {
        self.rule.v.len()
    }
}

/// `sum_i a_i sum_j b_j c_ij`: one full 2-D quadrature of a separable
/// polynomial factor against a weighted coupling grid.
#[inline]
pub(crate) fn quad2d<S: Scalar>(a: &[S], b: &[S], c: &[S]) -> S {
    let nv = b.len();
    let mut acc = S::zero();
    for (i, &ai) in a.iter().enumerate() {
        let row = &c[i * nv..(i + 1) * nv];
        let mut inner = S::zero();
        for (&bj, &cij) in b.iter().zip(row) {
            inner += bj * cij;
        }
        acc += ai * inner;
    }
    acc
}

/// Values of the first `count` members of `family` at every node: `[k][i]`.
pub(crate) fn basis_table<S: Scalar>(
    family: crate::chebyshev::PolyFamily,
    count: usize,
    nodes: &[S],
) -> Vec<Vec<S>> {
    let mut table = vec![vec![S::zero(); nodes.len()]; count];
    let mut buf = vec![S::zero(); count];
    for (i, &x) in nodes.iter().enumerate() {
        crate::chebyshev::eval_all(family, x, &mut buf);
        for k in 0..count {
            table[k][i] = buf[k];
        }
    }
    table
}

/// Number of 2-D integrals evaluated, per block or kernel table.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IntegralCounts {
    pub stiffness_uu: u64,
    pub stiffness_uv: u64,
    pub stiffness_vv: u64,
    pub mass_uu: u64,
    pub mass_uv: u64,
    pub mass_vv: u64,
}

impl IntegralCounts {
    pub fn total(&self) -> u64 {
        self.stiffness_uu
            + self.stiffness_uv
            + self.stiffness_vv
            + self.mass_uu
            + self.mass_uv
            + self.mass_vv
    }
}

impl std::ops::AddAssign for IntegralCounts {
    fn add_assign(&mut self, o: Self) {
        self.stiffness_uu += o.stiffness_uu;
        self.stiffness_uv += o.stiffness_uv;
        self.stiffness_vv += o.stiffness_vv;
        self.mass_uu += o.mass_uu;
        self.mass_uv += o.mass_uv;
        self.mass_vv += o.mass_vv;
    }
}
