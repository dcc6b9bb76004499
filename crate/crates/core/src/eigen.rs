//! Dense symmetric-definite generalized eigensolver for `S x = k0^2 M x`.
//!
//! `M = L L^T` is factored by Cholesky, `C = L^-1 S L^-T` is diagonalized by
//! cyclic Jacobi rotations and eigenvectors are mapped back with `L^-T`.

use crate::assembly::GlobalSystem;
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_FILTER_TOL: f64 = 1e-8;
const JACOBI_TOL: f64 = 1e-12;
const CLAMP_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 100;

/// `tol`, raised to `ulps` units of roundoff for scalars that cannot reach it.
fn attainable<S: Scalar>(tol: f64, ulps: f64) -> S {
    S::lit(tol).max(S::lit(ulps) * S::epsilon())
}

/// Retained cavity eigenvalues `k0^2` with the filtered gradient nullspace.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum<S> {
    /// Ascending eigenvalues above `filter_tol * max`.
    pub eigenvalues: Vec<S>,
    pub nullspace_count: usize,
    pub filter_tol: S,
    /// Largest eigenvalue of the full problem.
    pub max_eigenvalue: S,
}

impl<S: Scalar> Spectrum<S> {
    pub fn lowest(&self, count: usize) -> &[S] {
        &self.eigenvalues[..count.min(self.eigenvalues.len())]
    }
}

/// Lower-triangular `L` with `a = L L^T`.
pub fn cholesky<S: Scalar>(a: &DenseMatrix<S>) -> Result<DenseMatrix<S>> {
    let n = a.rows();
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > S::zero()) {
            return Err(Error::MassNotPositiveDefinite {
                pivot: j,
                value: d.as_f64(),
            });
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let (ri, rj) = (l.row(i), l.row(j));
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= ri[k] * rj[k];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Solves `L X = B` for lower-triangular `L`.
fn forward_solve<S: Scalar>(l: &DenseMatrix<S>, b: &DenseMatrix<S>) -> DenseMatrix<S> {
    let n = l.rows();
    let mut x = b.clone();
    for i in 0..n {
        for k in 0..i {
            let lik = l[(i, k)];
            if lik == S::zero() {
                continue;
            }
            let (head, tail) = split_rows(&mut x, k, i);
            for (xi, &xk) in tail.iter_mut().zip(head.iter()) {
                *xi -= lik * xk;
            }
        }
        let d = l[(i, i)];
        x.row_mut(i).iter_mut().for_each(|v| *v /= d);
    }
    x
}

/// Solves `L^T x = b` for a single vector.
fn backward_solve_transposed<S: Scalar>(l: &DenseMatrix<S>, b: &[S]) -> Vec<S> {
    let n = l.rows();
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in i + 1..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Borrows row `k` immutably and row `i` mutably (`k < i`).
fn split_rows<S: Scalar>(m: &mut DenseMatrix<S>, k: usize, i: usize) -> (&[S], &mut [S]) {
    debug_assert!(k < i);
    let cols = m.cols();
    let data = m.as_mut_slice();
    let (a, b) = data.split_at_mut(i * cols);
    (&a[k * cols..(k + 1) * cols], &mut b[..cols])
}

/// Round-robin pairing of `0..n`: `n - 1` steps (n padded to even) of
/// disjoint pairs that together cover every pair once.
fn tournament(n: usize) -> Vec<Vec<(usize, usize)>> {
    let m = n + n % 2;
    let mut ring: Vec<usize> = (0..m).collect();
    let mut steps = Vec::with_capacity(m.saturating_sub(1));
    for _ in 1..m {
        let step = (0..m / 2)
            .map(|i| (ring[i], ring[m - 1 - i]))
            .filter(|&(a, b)| a < n && b < n)
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        steps.push(step);
        ring[1..].rotate_right(1);
    }
    steps
}

#[derive(Clone, Copy)]
struct Rotation<S> {
    p: usize,
    q: usize,
    c: S,
    s: S,
}

/// Rotation that annihilates `a[p][q]`, or `None` when it is negligible.
fn plan<S: Scalar>(a: &DenseMatrix<S>, p: usize, q: usize, skip: S) -> Option<Rotation<S>> {
    let apq = a[(p, q)];
    if apq.abs() <= skip {
        return None;
    }
    let theta = (a[(q, q)] - a[(p, p)]) / (apq + apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + S::one()).sqrt());
    let c = S::one() / (t * t + S::one()).sqrt();
    Some(Rotation { p, q, c, s: t * c })
}

/// `rows <- J^T rows` for each rotation: mixes rows `p` and `q`.
fn rotate_rows<S: Scalar>(a: &mut DenseMatrix<S>, rots: &[Rotation<S>]) {
    let cols = a.cols();
    let data = a.as_mut_slice();
    for r in rots {
        let (rp, rq) = two_rows(data, cols, r.p, r.q);
        for (xp, xq) in rp.iter_mut().zip(rq.iter_mut()) {
            let (x, y) = (*xp, *xq);
            *xp = r.c * x - r.s * y;
            *xq = r.s * x + r.c * y;
        }
    }
}

/// Mixes columns `p` and `q` of one row for each rotation.
#[inline]
fn rotate_cols_of_row<S: Scalar>(row: &mut [S], rots: &[Rotation<S>]) {
    for r in rots {
        let (x, y) = (row[r.p], row[r.q]);
        row[r.p] = r.c * x - r.s * y;
        row[r.q] = r.s * x + r.c * y;
    }
}

/// `a <- J^T a J` in one pass over the rows: each rotated row pair is
/// finished while it is still in cache.
fn apply_step<S: Scalar>(a: &mut DenseMatrix<S>, rots: &[Rotation<S>], paired: &mut [bool]) {
    let cols = a.cols();
    let data = a.as_mut_slice();
    paired.iter_mut().for_each(|x| *x = false);
    for r in rots {
        paired[r.p] = true;
        paired[r.q] = true;
        let (rp, rq) = two_rows(data, cols, r.p, r.q);
        for (xp, xq) in rp.iter_mut().zip(rq.iter_mut()) {
            let (x, y) = (*xp, *xq);
            *xp = r.c * x - r.s * y;
            *xq = r.s * x + r.c * y;
        }
        rotate_cols_of_row(rp, rots);
        rotate_cols_of_row(rq, rots);
    }
    for (row, _) in data
        .chunks_exact_mut(cols)
        .zip(paired.iter())
        .filter(|(_, &p)| !p)
    {
        rotate_cols_of_row(row, rots);
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi.
///
/// Each sweep visits every off-diagonal pair once in round-robin order, so a
/// step applies `n/2` disjoint rotations together. Returns eigenvalues in
/// diagonal order and, when requested, eigenvectors as matrix rows.
pub fn jacobi_eigen<S: Scalar>(
    a: &DenseMatrix<S>,
    vectors: bool,
) -> Result<(Vec<S>, Option<DenseMatrix<S>>)> {
    let n = a.rows();
    let mut c = a.clone();
    let mut v = vectors.then(|| DenseMatrix::identity(n));
    let norm = c.as_slice().iter().map(|&x| x * x).sum::<S>().sqrt();
    let tol = attainable::<S>(JACOBI_TOL, 4.0) * norm;
    let steps = tournament(n);
    let mut paired = vec![false; n];
    for _ in 0..MAX_SWEEPS {
        let off = off_diagonal_norm(&c);
        if off <= tol || norm == S::zero() {
            let eig = (0..n).map(|i| c[(i, i)]).collect();
            return Ok((eig, v));
        }
        // entries this small cannot move the off-diagonal norm above tol
        let skip = tol / S::from_usize_exact(n.max(1));
        for step in &steps {
            let rots: Vec<Rotation<S>> = step
                .iter()
                .filter_map(|&(p, q)| plan(&c, p, q, skip))
                .collect();
            if rots.is_empty() {
                continue;
            }
            apply_step(&mut c, &rots, &mut paired);
            for r in &rots {
                c[(r.p, r.q)] = S::zero();
                c[(r.q, r.p)] = S::zero();
            }
            if let Some(v) = v.as_mut() {
                rotate_rows(v, &rots);
            }
        }
    }
    Err(Error::NumericalConsistency(format!(
        "Jacobi iteration did not converge in {MAX_SWEEPS} sweeps"
    )))
}

fn off_diagonal_norm<S: Scalar>(c: &DenseMatrix<S>) -> S {
    let n = c.rows();
    let mut s = S::zero();
    for i in 0..n {
        for (j, &x) in c.row(i).iter().enumerate() {
            if i != j {
                s += x * x;
            }
        }
    }
    s.sqrt()
}

fn two_rows<S>(data: &mut [S], cols: usize, p: usize, q: usize) -> (&mut [S], &mut [S]) {
    debug_assert!(p < q);
    let (a, b) = data.split_at_mut(q * cols);
    (&mut a[p * cols..(p + 1) * cols], &mut b[..cols])
}

/// Eigenpairs of `S x = lambda M x`, ascending. Vectors are `M`-orthonormal
/// rows when requested.
pub fn generalized_eigen<S: Scalar>(
    s: &DenseMatrix<S>,
    m: &DenseMatrix<S>,
    vectors: bool,
) -> Result<(Vec<S>, Option<DenseMatrix<S>>)> {
    let l = cholesky(m)?;
    let w = forward_solve(&l, s);
    let c = forward_solve(&l, &w.transpose());
    let half = S::lit(0.5);
    let c = DenseMatrix::from_fn(c.rows(), c.cols(), |i, j| half * (c[(i, j)] + c[(j, i)]));
    let (eig, y) = jacobi_eigen(&c, vectors)?;
    let mut order: Vec<usize> = (0..eig.len()).collect();
    order.sort_by(|&a, &b| eig[a].partial_cmp(&eig[b]).expect("finite eigenvalues"));
    let values = order.iter().map(|&k| eig[k]).collect();
    let vecs = y.map(|y| {
        let n = y.cols();
        let mut x = DenseMatrix::zeros(order.len(), n);
        for (row, &k) in order.iter().enumerate() {
            x.row_mut(row)
                .copy_from_slice(&backward_solve_transposed(&l, y.row(k)));
        }
        x
    });
    Ok((values, vecs))
}

/// Clamps roundoff-negative eigenvalues and splits off the gradient nullspace.
pub fn filter_spectrum<S: Scalar>(all: &[S], filter_tol: S) -> Result<Spectrum<S>> {
    let max = all.iter().copied().fold(S::zero(), S::max);
    let clamp = attainable::<S>(CLAMP_TOL, 256.0) * max;
    let mut eigenvalues = Vec::with_capacity(all.len());
    let mut nullspace_count = 0;
    for &lam in all {
        if lam < -clamp {
            return Err(Error::NumericalConsistency(format!(
                "negative eigenvalue {lam:e} below clamp -{clamp:e}"
            )));
        }
        let lam = lam.max(S::zero());
        if lam < filter_tol * max {
            nullspace_count += 1;
        } else {
            eigenvalues.push(lam);
        }
    }
    Ok(Spectrum {
        eigenvalues,
        nullspace_count,
        filter_tol,
        max_eigenvalue: max,
    })
}

/// Cavity spectrum of an assembled system.
pub fn spectrum<S: Scalar>(sys: &GlobalSystem<S>, filter_tol: S) -> Result<Spectrum<S>> {
    let (all, _) = generalized_eigen(&sys.s, &sys.m, false)?;
    filter_spectrum(&all, filter_tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_spd(n: usize, seed: u64) -> DenseMatrix<f64> {
        let mut x = seed;
        let mut next = || {
            x = x
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((x >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let b = DenseMatrix::from_fn(n, n, |_, _| next());
        let mut a = b.transpose().matmul(&b);
        for i in 0..n {
            a[(i, i)] += 0.5;
        }
        a
    }

    #[test]
    fn identity_problem() {
        let a = random_spd(6, 3);
        let (vals, _) = generalized_eigen(&a, &a, false).unwrap();
        assert!(vals.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        let sp = filter_spectrum(&vals, DEFAULT_FILTER_TOL).unwrap();
        assert_eq!(sp.nullspace_count, 0);
        assert_eq!(sp.eigenvalues.len(), 6);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = DenseMatrix::<f64>::identity(3);
        a[(2, 2)] = -1.0;
        assert!(matches!(
            cholesky(&a),
            Err(Error::MassNotPositiveDefinite { pivot: 2, .. })
        ));
    }

    #[test]
    fn jacobi_diagonalizes_known_matrix() {
        // eigenvalues of [[2,1],[1,2]] are 1 and 3
        let a = DenseMatrix::<f64>::from_fn(2, 2, |i, j| if i == j { 2.0 } else { 1.0 });
        let (mut e, _) = jacobi_eigen(&a, false).unwrap();
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((e[0] - 1.0).abs() < 1e-14 && (e[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn tournament_covers_every_pair_once() {
        for n in 1..12 {
            let mut seen = std::collections::BTreeSet::new();
            for step in tournament(n) {
                let mut used = std::collections::BTreeSet::new();
                for (p, q) in step {
                    assert!(p < q && q < n);
                    assert!(used.insert(p) && used.insert(q));
                    assert!(seen.insert((p, q)));
                }
            }
            assert_eq!(seen.len(), n * (n - 1) / 2);
        }
    }

    #[test]
    fn negative_eigenvalue_is_an_error() {
        assert!(filter_spectrum(&[-1.0, 2.0], 1e-8).is_err());
        let sp = filter_spectrum(&[-1e-13, 1e-12, 2.0, 5.0], 1e-8).unwrap();
        assert_eq!(sp.nullspace_count, 2);
        assert_eq!(sp.eigenvalues, vec![2.0, 5.0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn residuals_and_congruence(n in 2usize..24, seed in any::<u64>()) {
            let s = random_spd(n, seed);
            let m = random_spd(n, seed ^ 0x9e3779b97f4a7c15);
            let (vals, vecs) = generalized_eigen(&s, &m, true).unwrap();
            let vecs = vecs.unwrap();
            for (k, &lam) in vals.iter().enumerate() {
                let x = vecs.row(k);
                let sx = s.matvec(x);
                let mx = m.matvec(x);
                let res: f64 = sx.iter().zip(&mx).map(|(a, b)| (a - lam * b).powi(2)).sum::<f64>().sqrt();
                let scale: f64 = sx.iter().map(|a| a * a).sum::<f64>().sqrt();
                prop_assert!(res <= 1e-8 * scale);
            }
            // R^T S R, R^T M R with a nonsingular R keeps the spectrum
            let r = DenseMatrix::from_fn(n, n, |i, j| if i == j { 2.0 } else if j == i + 1 { 0.7 } else { 0.0 });
            let rs = r.transpose().matmul(&s).matmul(&r);
            let rm = r.transpose().matmul(&m).matmul(&r);
            let (vals2, _) = generalized_eigen(&rs, &rm, false).unwrap();
            for (a, b) in vals.iter().zip(&vals2) {
                prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
            }
        }
    }
}
