//! Hierarchical Chebyshev vector finite elements for 2-D electromagnetic
//! cavity eigenproblems on curvilinear quadrilaterals.
//!
//! Element matrices can be filled by direct Gauss quadrature or by a
//! product-to-sum backend that integrates only `O(MN)` kernel integrals per
//! element. The numerical core is generic over [`Scalar`] (`f32` or `f64`);
//! the aliases at the bottom fix the usual choice.

// index loops mirror the multi-index formulas; `!(x > 0)` comparisons deliberately catch NaN
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod bench;
pub mod chebyshev;
pub mod dense;
pub mod dofmap;
pub mod eigen;
pub mod error;
pub mod expr;
pub mod mesh;
pub mod quadrature;
pub mod scalar;
pub mod verify;

pub use assembly::{
    assemble_direct_element, assemble_global, assemble_p2s_element, assemble_system,
    compute_kernel_tables, AssemblyOptions, Backend, ElementMatrices, GlobalSystem, IntegralCounts,
    KernelTable, Orders,
};
pub use chebyshev::{product_to_sum, PolyFamily, SumExpansion, Term};
pub use dense::DenseMatrix;
pub use dofmap::{build_connectivity, DofMap};
pub use eigen::{spectrum, Spectrum};
pub use error::{Error, Result};
pub use expr::Expr;
pub use mesh::{generate_curved_cavity, generate_domain, load_mesh, DomainSpec, Materials, Mesh};
pub use quadrature::{gauss_legendre, QuadRule1D, TensorRule};
pub use scalar::Scalar;

pub type Mesh64 = Mesh<f64>;
pub type ElementMatrices64 = ElementMatrices<f64>;
pub type KernelTable64 = KernelTable<f64>;
pub type GlobalSystem64 = GlobalSystem<f64>;
pub type Spectrum64 = Spectrum<f64>;
pub type DenseMatrix64 = DenseMatrix<f64>;

pub type Mesh32 = Mesh<f32>;
pub type ElementMatrices32 = ElementMatrices<f32>;
pub type KernelTable32 = KernelTable<f32>;
pub type GlobalSystem32 = GlobalSystem<f32>;
pub type Spectrum32 = Spectrum<f32>;
pub type DenseMatrix32 = DenseMatrix<f32>;
