//! Rearrangement of the first-kind factor of each vector component into
//! edge-trace and zero-trace modes, which makes tangential continuity across
//! element edges a matter of identifying edge DOFs.
//!
//! In the `T` direction the new basis is
//!
//! ```text
//! e_0 = (T_0 - T_1) / 2        trace 1 at -1, 0 at +1
//! e_1 = (T_0 + T_1) / 2        trace 0 at -1, 1 at +1
//! e_k = T_k - T_{k mod 2}      zero trace at both ends, k >= 2
//! ```
//!
//! Each column of the change of basis has at most two nonzeros.

use arrayvec::ArrayVec;

use crate::dense::DenseMatrix;
use crate::scalar::Scalar;

use super::{ElementMatrices, Orders};

type Column<S> = ArrayVec<(usize, S), 2>;

#[derive(Clone, Debug)]
pub struct ConformingTransform<S> {
    pub orders: Orders,
    /// Flat `E_u` indices grouped by `m`, in order of the `T` degree in `v`.
    u_groups: Vec<Vec<usize>>,
    /// Flat `E_v` indices grouped by `n`, in order of the `T` degree in `u`.
    v_groups: Vec<Vec<usize>>,
    _scalar: std::marker::PhantomData<S>,
}

fn columns<S: Scalar>(size: usize) -> Vec<Column<S>> {
    let half = S::lit(0.5);
    (0..size)
        .map(|k| {
            let mut col = ArrayVec::new();
            match k {
                0 => {
                    col.push((0, half));
                    col.push((1, -half));
                }
                1 => {
                    col.push((0, half));
                    col.push((1, half));
                }
                _ => {
                    col.push((k % 2, -S::one()));
                    col.push((k, S::one()));
                }
            }
            col
        })
        .collect()
}

impl<S: Scalar> ConformingTransform<S> {
    pub fn new(orders: Orders) -> Self {
        let u_groups = (0..orders.m)
            .map(|m| (0..=orders.n).map(|a| orders.u_index(m, a)).collect())
            .collect();
        let v_groups = (0..orders.n)
            .map(|n| (0..=orders.m).map(|a| orders.v_index(a, n)).collect())
            .collect();
        ConformingTransform {
            orders,
            u_groups,
            v_groups,
            _scalar: std::marker::PhantomData,
        }
    }

    /// Dense `(k+1) x (k+1)` change of basis in first-kind coefficient coordinates.
    pub fn dense(size: usize) -> DenseMatrix<S> {
        let mut r = DenseMatrix::zeros(size, size);
        for (j, col) in columns::<S>(size).iter().enumerate() {
            for &(i, c) in col {
                r[(i, j)] = c;
            }
        }
        r
    }

    /// `R^T X R` on every block.
    pub fn apply(&self, x: &ElementMatrices<S>) -> ElementMatrices<S> {
        let mut out = x.clone();
        self.apply_in_place(&mut out);
        out
    }

    pub fn apply_in_place(&self, x: &mut ElementMatrices<S>) {
        assert_eq!(
            x.orders, self.orders,
            "transform built for different orders"
        );
        let (u, v) = (&self.u_groups, &self.v_groups);
        for (block, rows, cols) in [
            (&mut x.s_uu, u, u),
            (&mut x.s_uv, u, v),
            (&mut x.s_vv, v, v),
            (&mut x.m_uu, u, u),
            (&mut x.m_uv, u, v),
            (&mut x.m_vv, v, v),
        ] {
            transform_rows(block, rows);
            for r in 0..block.rows() {
                transform_entries(block.row_mut(r), cols);
            }
        }
        x.fill_transposes();
    }
}

/// `x <- R^T x` along each index group of a vector.
fn transform_entries<S: Scalar>(x: &mut [S], groups: &[Vec<usize>]) {
    let half = S::lit(0.5);
    for g in groups {
        let (x0, x1) = (x[g[0]], x[g[1]]);
        for (k, &i) in g.iter().enumerate().skip(2) {
            x[i] -= if k % 2 == 0 { x0 } else { x1 };
        }
        x[g[0]] = half * (x0 - x1);
        x[g[1]] = half * (x0 + x1);
    }
}

/// `X <- R^T X` on whole rows.
fn transform_rows<S: Scalar>(x: &mut DenseMatrix<S>, groups: &[Vec<usize>]) {
    let half = S::lit(0.5);
    let cols = x.cols();
    let data = x.as_mut_slice();
    for g in groups {
        for (k, &i) in g.iter().enumerate().skip(2) {
            let j = g[k % 2];
            let (src, dst) = disjoint_rows(data, cols, j, i);
            for (d, &s) in dst.iter_mut().zip(src.iter()) {
                *d -= s;
            }
        }
        let (r0, r1) = disjoint_rows(data, cols, g[0], g[1]);
        for (a, b) in r0.iter_mut().zip(r1.iter_mut()) {
            let (x0, x1) = (*a, *b);
            *a = half * (x0 - x1);
            *b = half * (x0 + x1);
        }
    }
}

fn disjoint_rows<S>(data: &mut [S], cols: usize, a: usize, b: usize) -> (&mut [S], &mut [S]) {
    if a < b {
        let (lo, hi) = data.split_at_mut(b * cols);
        (&mut lo[a * cols..(a + 1) * cols], &mut hi[..cols])
    } else {
        let (lo, hi) = data.split_at_mut(a * cols);
        let (b_row, a_row) = (&mut lo[b * cols..(b + 1) * cols], &mut hi[..cols]);
        (a_row, b_row)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chebyshev::eval_t;

    #[test]
    fn columns_for_n2() {
        let r = ConformingTransform::<f64>::dense(3);
        assert_eq!(
            r.transpose().as_slice(),
            &[0.5, -0.5, 0.0, 0.5, 0.5, 0.0, -1.0, 0.0, 1.0]
        );
    }

    #[test]
    fn trace_structure() {
        let r = ConformingTransform::<f64>::dense(7);
        let trace = |col: usize, x: f64| (0..7).map(|k| r[(k, col)] * eval_t(k, x)).sum::<f64>();
        assert_eq!(trace(0, -1.0), 1.0);
        assert_eq!(trace(0, 1.0), 0.0);
        assert_eq!(trace(1, -1.0), 0.0);
        assert_eq!(trace(1, 1.0), 1.0);
        for k in 2..7 {
            assert_eq!(trace(k, -1.0), 0.0);
            assert_eq!(trace(k, 1.0), 0.0);
        }
    }

    #[test]
    fn matches_dense_kronecker_congruence() {
        let o = Orders::new(2, 3).unwrap();
        let mut x = ElementMatrices::<f64>::zeros(o);
        let nl = o.local_len();
        let full = DenseMatrix::from_fn(nl, nl, |i, j| {
            ((i * 7 + j * 3) % 11) as f64 + if i == j { 20.0 } else { 0.0 }
        });
        let sym = DenseMatrix::from_fn(nl, nl, |i, j| full[(i, j)] + full[(j, i)]);
        let nu = o.u_len();
        x.m_uu = DenseMatrix::from_fn(nu, nu, |i, j| sym[(i, j)]);
        x.m_uv = DenseMatrix::from_fn(nu, nl - nu, |i, j| sym[(i, nu + j)]);
        x.m_vv = DenseMatrix::from_fn(nl - nu, nl - nu, |i, j| sym[(nu + i, nu + j)]);
        x.fill_transposes();

        let t = ConformingTransform::new(o);
        let y = t.apply(&x);
        // block-diagonal R assembled from the per-direction matrices
        let rn = ConformingTransform::<f64>::dense(o.n + 1);
        let rm = ConformingTransform::<f64>::dense(o.m + 1);
        let mut r = DenseMatrix::zeros(nl, nl);
        for m in 0..o.m {
            for (a, b) in (0..=o.n).flat_map(|a| (0..=o.n).map(move |b| (a, b))) {
                r[(o.u_index(m, a), o.u_index(m, b))] = rn[(a, b)];
            }
        }
        for n in 0..o.n {
            for (a, b) in (0..=o.m).flat_map(|a| (0..=o.m).map(move |b| (a, b))) {
                r[(nu + o.v_index(a, n), nu + o.v_index(b, n))] = rm[(a, b)];
            }
        }
        let want = r.transpose().matmul(&sym).matmul(&r);
        let got = y.mass();
        for i in 0..nl {
            for j in 0..nl {
                assert!((got[(i, j)] - want[(i, j)]).abs() < 1e-12);
            }
        }
        assert_eq!(got.asymmetry(), 0.0);
    }
}
