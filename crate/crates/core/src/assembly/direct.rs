//! Direct backend: every distinct matrix entry is one full 2-D quadrature.
//!
//! `uu` and `vv` blocks are symmetric under `m1 <-> m2` and, independently,
//! `n1 <-> n2`, so only entries with `m1 <= m2` and `n1 <= n2` are integrated.

use crate::chebyshev::PolyFamily;
use crate::error::Result;
use crate::mesh::Mesh;
use crate::scalar::Scalar;

use super::{basis_table, quad2d, CouplingGrid, ElementMatrices, IntegralCounts, Orders};

pub fn assemble_direct_element<S: Scalar>(
    mesh: &Mesh<S>,
    elem: usize,
    orders: Orders,
    nq: usize,
) -> Result<(ElementMatrices<S>, IntegralCounts)> {
    let grid = CouplingGrid::sample(mesh, elem, nq)?;
    Ok(direct_from_grid(&grid, orders))
}

fn products<S: Scalar>(a: &[S], b: &[S], out: &mut [S]) {
    for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
        *o = x * y;
    }
}

pub fn direct_from_grid<S: Scalar>(
    grid: &CouplingGrid<S>,
    orders: Orders,
) -> (ElementMatrices<S>, IntegralCounts) {
    let (mut out, counts) = direct_upper(grid, orders);
    out.fill_transposes();
    (out, counts)
}

/// Direct integration without the `*_vu` transposes.
pub(crate) fn direct_upper<S: Scalar>(
    grid: &CouplingGrid<S>,
    orders: Orders,
) -> (ElementMatrices<S>, IntegralCounts) {
    let Orders { m: mm, n: nn } = orders;
    let un = &grid.rule.u.nodes;
    let vn = &grid.rule.v.nodes;
    let tu = basis_table(PolyFamily::T, mm + 1, un);
    let uu = basis_table(PolyFamily::U, mm + 1, un);
    let tv = basis_table(PolyFamily::T, nn + 1, vn);
    let uv = basis_table(PolyFamily::U, nn + 1, vn);

    let mut out = ElementMatrices::zeros_upper(orders);
    let mut counts = IntegralCounts::default();
    let mut a = vec![S::zero(); un.len()];
    let mut b = vec![S::zero(); vn.len()];
    let ui = |m, n| orders.u_index(m, n);
    let vi = |m, n| orders.v_index(m, n);

    // mass uu: U_m1 U_m2 (u) x T_n1 T_n2 (v)
    for m1 in 0..mm {
        for m2 in m1..mm {
            products(&uu[m1], &uu[m2], &mut a);
            for n1 in 0..=nn {
                for n2 in n1..=nn {
                    products(&tv[n1], &tv[n2], &mut b);
                    let val = quad2d(&a, &b, &grid.mass_uu);
                    counts.mass_uu += 1;
                    set_four_fold(&mut out.m_uu, ui, (m1, m2, n1, n2), val);
                }
            }
        }
    }

    // mass vv: T_m1 T_m2 (u) x U_n1 U_n2 (v)
    for m1 in 0..=mm {
        for m2 in m1..=mm {
            products(&tu[m1], &tu[m2], &mut a);
            for n1 in 0..nn {
                for n2 in n1..nn {
                    products(&uv[n1], &uv[n2], &mut b);
                    let val = quad2d(&a, &b, &grid.mass_vv);
                    counts.mass_vv += 1;
                    set_four_fold(&mut out.m_vv, vi, (m1, m2, n1, n2), val);
                }
            }
        }
    }

    // mass uv: -U_m1 T_m2 (u) x T_n1 U_n2 (v)
    for m1 in 0..mm {
        for m2 in 0..=mm {
            products(&uu[m1], &tu[m2], &mut a);
            for n1 in 0..=nn {
                for n2 in 0..nn {
                    products(&tv[n1], &uv[n2], &mut b);
                    out.m_uv[(ui(m1, n1), vi(m2, n2))] = -quad2d(&a, &b, &grid.mass_uv);
                    counts.mass_uv += 1;
                }
            }
        }
    }

    let sg = &grid.stiffness;

    // stiffness uu: n1 n2 U_m1 U_m2 (u) x U_{n1-1} U_{n2-1} (v)
    for m1 in 0..mm {
        for m2 in m1..mm {
            products(&uu[m1], &uu[m2], &mut a);
            for n1 in 1..=nn {
                for n2 in n1..=nn {
                    products(&uv[n1 - 1], &uv[n2 - 1], &mut b);
                    let val = S::from_usize_exact(n1 * n2) * quad2d(&a, &b, sg);
                    counts.stiffness_uu += 1;
                    set_four_fold(&mut out.s_uu, ui, (m1, m2, n1, n2), val);
                }
            }
        }
    }

    // stiffness vv: m1 m2 U_{m1-1} U_{m2-1} (u) x U_n1 U_n2 (v)
    for m1 in 1..=mm {
        for m2 in m1..=mm {
            products(&uu[m1 - 1], &uu[m2 - 1], &mut a);
            for n1 in 0..nn {
                for n2 in n1..nn {
                    products(&uv[n1], &uv[n2], &mut b);
                    let val = S::from_usize_exact(m1 * m2) * quad2d(&a, &b, sg);
                    counts.stiffness_vv += 1;
                    set_four_fold(&mut out.s_vv, vi, (m1, m2, n1, n2), val);
                }
            }
        }
    }

    // stiffness uv: -n1 m2 U_m1 U_{m2-1} (u) x U_{n1-1} U_n2 (v)
    for m1 in 0..mm {
        for m2 in 1..=mm {
            products(&uu[m1], &uu[m2 - 1], &mut a);
            for n1 in 1..=nn {
                for n2 in 0..nn {
                    products(&uv[n1 - 1], &uv[n2], &mut b);
                    let val = -S::from_usize_exact(n1 * m2) * quad2d(&a, &b, sg);
                    counts.stiffness_uv += 1;
                    out.s_uv[(ui(m1, n1), vi(m2, n2))] = val;
                }
            }
        }
    }

    (out, counts)
}

fn set_four_fold<S: Scalar>(
    block: &mut crate::dense::DenseMatrix<S>,
    index: impl Fn(usize, usize) -> usize,
    (m1, m2, n1, n2): (usize, usize, usize, usize),
    val: S,
) {
    block[(index(m1, n1), index(m2, n2))] = val;
    block[(index(m2, n2), index(m1, n1))] = val;
    block[(index(m2, n1), index(m1, n2))] = val;
    block[(index(m1, n2), index(m2, n1))] = val;
}
