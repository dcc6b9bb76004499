//! Product-to-sum backend.
//!
//! Every product of two same-variable basis polynomials in an entry is
//! replaced by its two-term expansion, so each entry becomes a signed sum of
//! at most four kernel integrals
//!
//! ```text
//! Ks (a, b) = ∬ Tns_a(u) Tns_b(v) / (mu_r J)
//! Kuu(a, b) = ∬ Tns_a(u) T_b(v)   eps_r (x_v^2 + y_v^2) / J
//! Kuv(a, b) = ∬ U_a(u)   U_b(v)   eps_r (x_u x_v + y_u y_v) / J
//! Kvv(a, b) = ∬ T_a(u)   Tns_b(v) eps_r (x_u^2 + y_u^2) / J
//! ```
//!
//! Only `O(MN)` kernel integrals are evaluated per element instead of
//! `O((MN)^2)` entry integrals.

use crate::chebyshev::{product_to_sum, PolyFamily, SumExpansion};
use crate::dense::DenseMatrix;
use crate::error::Result;
use crate::mesh::Mesh;
use crate::scalar::Scalar;

use super::{basis_table, quad2d, CouplingGrid, ElementMatrices, Orders};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct KernelCounts {
    pub ks: u64,
    pub kuu: u64,
    pub kuv: u64,
    pub kvv: u64,
}

impl KernelCounts {
    pub fn total(&self) -> u64 {
        self.ks + self.kuu + self.kuv + self.kvv
    }
}

/// Kernel integrals of one element. `ks`, `kuu`, `kvv` are `(2M+1) x (2N+1)`,
/// `kuv` is `2M x 2N`. Rows with a `Tns_0` or `Tns_1` factor are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelTable<S> {
    pub orders: Orders,
    pub ks: DenseMatrix<S>,
    pub kuu: DenseMatrix<S>,
    pub kuv: DenseMatrix<S>,
    pub kvv: DenseMatrix<S>,
    pub counts: KernelCounts,
}

pub fn compute_kernel_tables<S: Scalar>(
    mesh: &Mesh<S>,
    elem: usize,
    orders: Orders,
    nq: usize,
) -> Result<KernelTable<S>> {
    let grid = CouplingGrid::sample(mesh, elem, nq)?;
    Ok(kernels_from_grid(&grid, orders))
}

fn fill_table<S: Scalar>(
    u_tab: &[Vec<S>],
    v_tab: &[Vec<S>],
    coupling: &[S],
    count: &mut u64,
) -> DenseMatrix<S> {
    DenseMatrix::from_fn(u_tab.len(), v_tab.len(), |a, b| {
        *count += 1;
        quad2d(&u_tab[a], &v_tab[b], coupling)
    })
}

pub fn kernels_from_grid<S: Scalar>(grid: &CouplingGrid<S>, orders: Orders) -> KernelTable<S> {
    let (mu, nu) = (2 * orders.m, 2 * orders.n);
    let un = &grid.rule.u.nodes;
    let vn = &grid.rule.v.nodes;
    let tns_u = basis_table(PolyFamily::Tns, mu + 1, un);
    let tns_v = basis_table(PolyFamily::Tns, nu + 1, vn);
    let t_u = basis_table(PolyFamily::T, mu + 1, un);
    let t_v = basis_table(PolyFamily::T, nu + 1, vn);
    let u_u = basis_table(PolyFamily::U, mu, un);
    let u_v = basis_table(PolyFamily::U, nu, vn);

    let mut counts = KernelCounts::default();
    let ks = fill_table(&tns_u, &tns_v, &grid.stiffness, &mut counts.ks);
    let kuu = fill_table(&tns_u, &t_v, &grid.mass_uu, &mut counts.kuu);
    let kuv = fill_table(&u_u, &u_v, &grid.mass_uv, &mut counts.kuv);
    let kvv = fill_table(&t_u, &tns_v, &grid.mass_vv, &mut counts.kvv);
    KernelTable {
        orders,
        ks,
        kuu,
        kuv,
        kvv,
        counts,
    }
}

/// Two-term expansion with fixed layout; a missing term has coefficient zero.
#[derive(Clone, Copy, Debug)]
struct Pair<S> {
    deg: [usize; 2],
    coeff: [S; 2],
}

impl<S: Scalar> From<SumExpansion<S>> for Pair<S> {
    fn from(e: SumExpansion<S>) -> Self {
        let mut p = Pair {
            deg: [0; 2],
            coeff: [S::zero(); 2],
        };
        for (k, t) in e.terms().iter().enumerate() {
            p.deg[k] = t.degree;
            p.coeff[k] = t.coeff;
        }
        p
    }
}

/// `[a][b]` -> expansion of `fam_a_a * fam_b_b` for `a < rows`, `b < cols`.
fn expansion_table<S: Scalar>(
    fa: PolyFamily,
    rows: usize,
    fb: PolyFamily,
    cols: usize,
) -> Vec<Vec<Pair<S>>> {
    (0..rows)
        .map(|a| {
            (0..cols)
                .map(|b| {
                    product_to_sum(fa, a, fb, b)
                        .expect("T/U products always expand")
                        .into()
                })
                .collect()
        })
        .collect()
}

/// Kernel row contracted with the `u` expansion: `w[b] = sum_k c_k table[d_k][b]`.
fn fold_u<S: Scalar>(table: &DenseMatrix<S>, eu: &Pair<S>, w: &mut Vec<S>) {
    let (r0, r1) = (table.row(eu.deg[0]), table.row(eu.deg[1]));
    w.clear();
    w.extend(
        r0.iter()
            .zip(r1)
            .map(|(&a, &b)| eu.coeff[0] * a + eu.coeff[1] * b),
    );
}

#[inline]
fn apply_v<S: Scalar>(w: &[S], ev: &Pair<S>) -> S {
    ev.coeff[0] * w[ev.deg[0]] + ev.coeff[1] * w[ev.deg[1]]
}

/// Recombines kernel tables into element blocks.
///
/// # Panics
///
/// Panics if `kernels` was computed for smaller orders than `orders`.
pub fn assemble_p2s_element<S: Scalar>(
    kernels: &KernelTable<S>,
    orders: Orders,
) -> ElementMatrices<S> {
    let mut out = p2s_upper(kernels, orders);
    out.fill_transposes();
    out
}

/// Recombination without the `*_vu` transposes.
pub(crate) fn p2s_upper<S: Scalar>(kernels: &KernelTable<S>, orders: Orders) -> ElementMatrices<S> {
    use PolyFamily::{T, U};
    assert!(
        kernels.orders.m >= orders.m && kernels.orders.n >= orders.n,
        "kernel table for {} cannot serve {}",
        kernels.orders,
        orders
    );
    let Orders { m: mm, n: nn } = orders;
    let uu_m = expansion_table::<S>(U, mm, U, mm);
    let tt_m = expansion_table::<S>(T, mm + 1, T, mm + 1);
    let ut_m = expansion_table::<S>(U, mm, T, mm + 1);
    let uu_n = expansion_table::<S>(U, nn, U, nn);
    let tt_n = expansion_table::<S>(T, nn + 1, T, nn + 1);
    let ut_n = expansion_table::<S>(U, nn, T, nn + 1);

    let mut out = ElementMatrices::zeros_upper(orders);
    let ui = |m, n| orders.u_index(m, n);
    let vi = |m, n| orders.v_index(m, n);
    let int = S::from_usize_exact;
    let (mut wm, mut ws) = (Vec::new(), Vec::new());

    for m1 in 0..mm {
        for m2 in m1..mm {
            fold_u(&kernels.kuu, &uu_m[m1][m2], &mut wm);
            fold_u(&kernels.ks, &uu_m[m1][m2], &mut ws);
            for n1 in 0..=nn {
                for n2 in n1..=nn {
                    let val = apply_v(&wm, &tt_n[n1][n2]);
                    set_four_fold(&mut out.m_uu, ui, (m1, m2, n1, n2), val);
                    if n1 >= 1 {
                        let s = int(n1 * n2) * apply_v(&ws, &uu_n[n1 - 1][n2 - 1]);
                        set_four_fold(&mut out.s_uu, ui, (m1, m2, n1, n2), s);
                    }
                }
            }
        }
    }

    for m1 in 0..=mm {
        for m2 in m1..=mm {
            fold_u(&kernels.kvv, &tt_m[m1][m2], &mut wm);
            if m1 >= 1 {
                fold_u(&kernels.ks, &uu_m[m1 - 1][m2 - 1], &mut ws);
            }
            for n1 in 0..nn {
                for n2 in n1..nn {
                    let val = apply_v(&wm, &uu_n[n1][n2]);
                    set_four_fold(&mut out.m_vv, vi, (m1, m2, n1, n2), val);
                    if m1 >= 1 {
                        let s = int(m1 * m2) * apply_v(&ws, &uu_n[n1][n2]);
                        set_four_fold(&mut out.s_vv, vi, (m1, m2, n1, n2), s);
                    }
                }
            }
        }
    }

    for m1 in 0..mm {
        for m2 in 0..=mm {
            // U_m1 T_m2 in u, T_n1 U_n2 in v
            fold_u(&kernels.kuv, &ut_m[m1][m2], &mut wm);
            if m2 >= 1 {
                fold_u(&kernels.ks, &uu_m[m1][m2 - 1], &mut ws);
            }
            for n1 in 0..=nn {
                for n2 in 0..nn {
                    out.m_uv[(ui(m1, n1), vi(m2, n2))] = -apply_v(&wm, &ut_n[n2][n1]);
                    if n1 >= 1 && m2 >= 1 {
                        out.s_uv[(ui(m1, n1), vi(m2, n2))] =
                            -int(n1 * m2) * apply_v(&ws, &uu_n[n1 - 1][n2]);
                    }
                }
            }
        }
    }

    out
}

fn set_four_fold<S: Scalar>(
    block: &mut DenseMatrix<S>,
    index: impl Fn(usize, usize) -> usize,
    (m1, m2, n1, n2): (usize, usize, usize, usize),
    val: S,
) {
    block[(index(m1, n1), index(m2, n2))] = val;
    block[(index(m2, n2), index(m1, n1))] = val;
    block[(index(m2, n1), index(m1, n2))] = val;
    block[(index(m1, n2), index(m2, n1))] = val;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::direct::assemble_direct_element;
    use crate::mesh::{reference_square, Materials};
    use approx::assert_abs_diff_eq;

    fn identity_kernels(orders: Orders) -> KernelTable<f64> {
        let mesh = reference_square::<f64>(1, Materials::homogeneous(1.0, 1.0));
        compute_kernel_tables(&mesh, 0, orders, 12).unwrap()
    }

    #[test]
    fn identity_kernel_examples() {
        let k = identity_kernels(Orders::square(2).unwrap());
        assert_eq!(k.kuu[(0, 0)], 0.0);
        assert_abs_diff_eq!(k.kuu[(2, 0)], -4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(k.ks[(2, 2)], 4.0, epsilon = 1e-14);
        for b in 0..5 {
            for a in 0..2 {
                assert_eq!(k.ks[(a, b)], 0.0);
                assert_eq!(k.ks[(b, a)], 0.0);
                assert_eq!(k.kuu[(a, b)], 0.0);
                assert_eq!(k.kvv[(b, a)], 0.0);
            }
        }
        assert_eq!(
            (k.ks.rows(), k.ks.cols(), k.kuv.rows(), k.kuv.cols()),
            (5, 5, 4, 4)
        );
        assert_eq!(
            k.counts,
            KernelCounts {
                ks: 25,
                kuu: 25,
                kuv: 16,
                kvv: 25
            }
        );
    }

    #[test]
    fn identity_combination_examples() {
        let o = Orders::square(2).unwrap();
        let k = identity_kernels(o);
        let em = assemble_p2s_element(&k, o);
        let m0 = 0.5 * (k.kuu[(0, 0)] + k.kuu[(0, 0)] - k.kuu[(2, 0)] - k.kuu[(2, 0)]);
        assert_abs_diff_eq!(m0, 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(em.m_uu[(0, 0)], 4.0, epsilon = 1e-14);
        let s = k.ks[(0, 0)] - k.ks[(0, 2)] - k.ks[(4, 0)] + k.ks[(4, 2)];
        assert_abs_diff_eq!(s, 16.0 / 3.0, epsilon = 1e-13);
        assert_abs_diff_eq!(
            em.s_uu[(o.u_index(1, 1), o.u_index(1, 1))],
            16.0 / 3.0,
            epsilon = 1e-13
        );
    }

    #[test]
    fn matches_direct_on_identity() {
        for k in 1..=5 {
            let o = Orders::new(k, k + 1).unwrap();
            let mesh = reference_square::<f64>(1, Materials::parse("1+x*y/4", "2+sin(x)").unwrap());
            let nq = o.default_quad_points(1);
            let (direct, _) = assemble_direct_element(&mesh, 0, o, nq).unwrap();
            let p2s = assemble_p2s_element(&compute_kernel_tables(&mesh, 0, o, nq).unwrap(), o);
            assert!(direct.max_relative_difference(&p2s) < 1e-12);
        }
    }

    #[test]
    #[should_panic(expected = "cannot serve")]
    fn undersized_table_is_a_contract_violation() {
        let k = identity_kernels(Orders::square(2).unwrap());
        assemble_p2s_element(&k, Orders::square(3).unwrap());
    }
}
