//! Chebyshev polynomials of the first and second kind, the nonsingular
//! first-kind family, and the product-to-sum identities that turn a product
//! of two one-dimensional basis polynomials into at most two kernel terms.

use std::fmt;
use std::sync::{Arc, OnceLock, RwLock};

use arrayvec::ArrayVec;
use thiserror::Error;

use crate::scalar::Scalar;

/// Polynomial family of a single expansion term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolyFamily {
    /// First kind, `T_n(cos t) = cos(n t)`.
    T,
    /// Second kind, `U_n(cos t) = sin((n + 1) t) / sin t`.
    U,
    /// Nonsingular first kind: `(T_n - T_{n mod 2}) / (2 (1 - u^2))`, degree `n - 2`.
    /// `Tns_0` and `Tns_1` are identically zero.
    Tns,
}

impl fmt::Display for PolyFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolyFamily::T => "T",
            PolyFamily::U => "U",
            PolyFamily::Tns => "Tns",
        })
    }
}

/// `T_n(u)` by the three-term recurrence.
pub fn eval_t<S: Scalar>(n: usize, u: S) -> S {
    let two_u = u + u;
    let (mut prev, mut cur) = (S::one(), u);
    if n == 0 {
        return prev;
    }
    for _ in 1..n {
        let next = two_u * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `U_n(u)` by the three-term recurrence.
pub fn eval_u<S: Scalar>(n: usize, u: S) -> S {
    let two_u = u + u;
    let (mut prev, mut cur) = (S::one(), two_u);
    if n == 0 {
        return prev;
    }
    for _ in 1..n {
        let next = two_u * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `Tns_n(u)`, evaluated from its cached first-kind expansion. Well defined at `u = ±1`.
pub fn eval_tns<S: Scalar>(n: usize, u: S) -> S {
    if n < 2 {
        return S::zero();
    }
    clenshaw_t(&tns_coefficients(n), u)
}

pub fn eval<S: Scalar>(family: PolyFamily, n: usize, u: S) -> S {
    match family {
        PolyFamily::T => eval_t(n, u),
        PolyFamily::U => eval_u(n, u),
        PolyFamily::Tns => eval_tns(n, u),
    }
}

/// Fills `out[k] = family_k(u)` for `k = 0..out.len()`.
pub fn eval_all<S: Scalar>(family: PolyFamily, u: S, out: &mut [S]) {
    match family {
        PolyFamily::T | PolyFamily::U => {
            if out.is_empty() {
                return;
            }
            let two_u = u + u;
            out[0] = S::one();
            if out.len() > 1 {
                out[1] = if family == PolyFamily::T { u } else { two_u };
            }
            for k in 2..out.len() {
                out[k] = two_u * out[k - 1] - out[k - 2];
            }
        }
        PolyFamily::Tns => {
            for (k, slot) in out.iter_mut().enumerate() {
                *slot = eval_tns(k, u);
            }
        }
    }
}

/// Sum of a first-kind series `sum_k c_k T_k(u)` by Clenshaw's recurrence.
pub fn clenshaw_t<S: Scalar>(coeffs: &[f64], u: S) -> S {
    let two_u = u + u;
    let (mut b1, mut b2) = (S::zero(), S::zero());
    for &c in coeffs.iter().skip(1).rev() {
        let b0 = S::lit(c) + two_u * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    match coeffs.first() {
        Some(&c0) => S::lit(c0) + u * b1 - b2,
        None => S::zero(),
    }
}

fn tns_cache() -> &'static RwLock<Vec<Arc<[f64]>>> {
    static CACHE: OnceLock<RwLock<Vec<Arc<[f64]>>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(Vec::new()))
}

/// First-kind coefficients of `Tns_n` (length `n - 1`, empty for `n < 2`).
///
/// Computed once per degree by exact division of `T_n - T_{n mod 2}` by
/// `2 (1 - u^2)` in the Chebyshev basis. All coefficients are small integers.
pub fn tns_coefficients(n: usize) -> Arc<[f64]> {
    if let Some(c) = tns_cache().read().expect("tns cache poisoned").get(n) {
        return Arc::clone(c);
    }
    let mut cache = tns_cache().write().expect("tns cache poisoned");
    while cache.len() <= n {
        let degree = cache.len();
        cache.push(divide_out_one_minus_u2(degree).into());
    }
    Arc::clone(&cache[n])
}

fn divide_out_one_minus_u2(n: usize) -> Vec<f64> {
    if n < 2 {
        return Vec::new();
    }
    let mut rem = vec![0.0; n + 1];
    rem[n] = 1.0;
    rem[n % 2] -= 1.0;
    let mut quot = vec![0.0; n - 1];
    // 2(1 - u^2) T_k = T_k - T_{k+2}/2 - T_{|k-2|}/2
    for d in (2..=n).rev() {
        let k = d - 2;
        let lead = if k == 0 { -1.0 } else { -0.5 };
        let q = rem[d] / lead;
        quot[k] = q;
        rem[k] -= q;
        rem[d] += 0.5 * q;
        rem[k.abs_diff(2)] += 0.5 * q;
    }
    debug_assert!(
        rem.iter().all(|&r| r == 0.0),
        "Tns_{n} division left a remainder"
    );
    quot
}

/// One `coeff * family_degree(u)` term of a [`SumExpansion`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Term<S> {
    pub coeff: S,
    pub family: PolyFamily,
    pub degree: usize,
}

impl<S: Scalar> Term<S> {
    pub fn new(coeff: S, family: PolyFamily, degree: usize) -> Self {
        Term {
            coeff,
            family,
            degree,
        }
    }

    pub fn eval(&self, u: S) -> S {
        self.coeff * eval(self.family, self.degree, u)
    }
}

/// A product of two Chebyshev polynomials rewritten as a sparse sum.
///
/// Holds at most two terms, no two with the same `(family, degree)` and none
/// with a zero coefficient.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SumExpansion<S> {
    terms: ArrayVec<Term<S>, 2>,
}

impl<S: Scalar> SumExpansion<S> {
    pub fn new() -> Self {
        SumExpansion {
            terms: ArrayVec::new(),
        }
    }

    pub fn terms(&self) -> &[Term<S>] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Adds a term, merging with an existing term of the same family and degree.
    fn push(&mut self, term: Term<S>) {
        if term.coeff == S::zero() {
            return;
        }
        if let Some(pos) = self
            .terms
            .iter()
            .position(|t| t.family == term.family && t.degree == term.degree)
        {
            let merged = self.terms[pos].coeff + term.coeff;
            if merged == S::zero() {
                self.terms.remove(pos);
            } else {
                self.terms[pos].coeff = merged;
            }
        } else {
            self.terms.push(term);
        }
    }

    pub fn eval(&self, u: S) -> S {
        self.terms.iter().map(|t| t.eval(u)).sum()
    }

    pub fn max_degree(&self) -> Option<usize> {
        self.terms.iter().map(|t| t.degree).max()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("product-to-sum is defined for T and U factors only, got {0} x {1}")]
pub struct UnsupportedProduct(pub PolyFamily, pub PolyFamily);

/// `U_k` for a signed index: `U_{-1} = 0` and `U_k = -U_{-k-2}` for `k <= -2`.
pub fn normalize_signed_u<S: Scalar>(k: i64) -> Option<Term<S>> {
    match k {
        k if k >= 0 => Some(Term::new(S::one(), PolyFamily::U, k as usize)),
        -1 => None,
        k => Some(Term::new(-S::one(), PolyFamily::U, (-k - 2) as usize)),
    }
}

/// Rewrites `famA_a(u) * famB_b(u)` as a sum of at most two polynomials:
///
/// * `U_a U_b = Tns_{|a-b|} - Tns_{a+b+2}`
/// * `T_a T_b = (T_{|a-b|} + T_{a+b}) / 2`
/// * `U_a T_b = (U_{a-b} + U_{a+b}) / 2`, negative indices folded by [`normalize_signed_u`]
pub fn product_to_sum<S: Scalar>(
    fam_a: PolyFamily,
    a: usize,
    fam_b: PolyFamily,
    b: usize,
) -> Result<SumExpansion<S>, UnsupportedProduct> {
    use PolyFamily::*;
    let half = S::lit(0.5);
    let mut out = SumExpansion::new();
    match (fam_a, fam_b) {
        (U, U) => {
            out.push(Term::new(S::one(), Tns, a.abs_diff(b)));
            out.push(Term::new(-S::one(), Tns, a + b + 2));
        }
        (T, T) => {
            out.push(Term::new(half, T, a.abs_diff(b)));
            out.push(Term::new(half, T, a + b));
        }
        (U, T) | (T, U) => {
            let (ui, ti) = if fam_a == U { (a, b) } else { (b, a) };
            if let Some(t) = normalize_signed_u::<S>(ui as i64 - ti as i64) {
                out.push(Term::new(half * t.coeff, U, t.degree));
            }
            out.push(Term::new(half, U, ui + ti));
        }
        (x, y) => return Err(UnsupportedProduct(x, y)),
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    // independent oracles
    fn t_trig(n: usize, u: f64) -> f64 {
        (n as f64 * u.acos()).cos()
    }

    fn u_signed_trig(k: i64, u: f64) -> f64 {
        let th = u.acos();
        ((k + 1) as f64 * th).sin() / th.sin()
    }

    // Tns_n = -(U_{n-2} + U_{n-4} + ...) from T_n - T_{n-2} = -2 (1 - u^2) U_{n-2}
    fn tns_telescoped(n: usize, u: f64) -> f64 {
        let mut s = 0.0;
        let mut k = n as i64 - 2;
        while k >= 0 {
            s -= eval_u(k as usize, u);
            k -= 2;
        }
        s
    }

    #[test]
    fn t_examples() {
        assert_eq!(eval_t(0, 0.73), 1.0);
        assert_abs_diff_eq!(eval_t(3, 0.5), -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(eval_t(5, 0.3), 0.99888, epsilon = 1e-14);
        assert_abs_diff_eq!(eval_t(5, 0.3), t_trig(5, 0.3), epsilon = 1e-14);
    }

    #[test]
    fn u_examples() {
        assert_eq!(eval_u(0, -0.4), 1.0);
        assert_abs_diff_eq!(eval_u(2, 0.5), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(eval_u(3, 0.2), -0.736, epsilon = 1e-15);
    }

    #[test]
    fn tns_examples() {
        assert_abs_diff_eq!(eval_tns(2, 0.9), -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(eval_tns(3, 0.4), -0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(eval_tns(4, 0.5), -1.0, epsilon = 1e-15);
        assert_eq!(eval_tns(0, 0.3), 0.0);
        assert_eq!(eval_tns(1, -1.0), 0.0);
        assert_eq!(&*tns_coefficients(4), &[-2.0, 0.0, -2.0]);
    }

    #[test]
    fn tns_at_endpoints_is_finite() {
        for n in 0..=40 {
            for u in [-1.0, 1.0] {
                let v: f64 = eval_tns(n, u);
                assert!(v.is_finite());
                assert_abs_diff_eq!(v, tns_telescoped(n, u), epsilon = 1e-9 * (1.0 + v.abs()));
            }
        }
    }

    #[test]
    fn tns_matches_telescoped_sum() {
        for n in 0..=40 {
            for i in 0..=50 {
                let u = -1.0 + 2.0 * i as f64 / 50.0;
                let want = tns_telescoped(n, u);
                assert_abs_diff_eq!(eval_tns(n, u), want, epsilon = 1e-11 * (1.0 + want.abs()));
            }
        }
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(
            normalize_signed_u::<f64>(2),
            Some(Term::new(1.0, PolyFamily::U, 2))
        );
        assert_eq!(normalize_signed_u::<f64>(-1), None);
        assert_eq!(
            normalize_signed_u::<f64>(-3),
            Some(Term::new(-1.0, PolyFamily::U, 1))
        );
        for k in -12..12 {
            let u = 0.37;
            let got = normalize_signed_u::<f64>(k).map_or(0.0, |t| t.eval(u));
            assert_abs_diff_eq!(got, u_signed_trig(k, u), epsilon = 1e-12);
        }
    }

    #[test]
    fn product_examples() {
        use PolyFamily::*;
        let uu = product_to_sum::<f64>(U, 1, U, 1).unwrap();
        assert_eq!(
            uu.terms(),
            &[Term::new(1.0, Tns, 0), Term::new(-1.0, Tns, 4)]
        );
        assert_abs_diff_eq!(uu.eval(0.3), 4.0 * 0.09, epsilon = 1e-15);

        let tt = product_to_sum::<f64>(T, 1, T, 1).unwrap();
        assert_eq!(tt.terms(), &[Term::new(0.5, T, 0), Term::new(0.5, T, 2)]);

        let ut = product_to_sum::<f64>(U, 2, T, 3).unwrap();
        assert_eq!(ut.terms(), &[Term::new(0.5, U, 5)]);
        let u = 0.61;
        let oracle = (4.0 * u * u - 1.0) * (4.0 * u * u * u - 3.0 * u);
        assert_abs_diff_eq!(ut.eval(u), oracle, epsilon = 1e-14);
    }

    #[test]
    fn coincident_terms_merge() {
        use PolyFamily::*;
        let tt = product_to_sum::<f64>(T, 3, T, 0).unwrap();
        assert_eq!(tt.terms(), &[Term::new(1.0, T, 3)]);
        let ut = product_to_sum::<f64>(T, 0, U, 4).unwrap();
        assert_eq!(ut.terms(), &[Term::new(1.0, U, 4)]);
    }

    #[test]
    fn tns_factors_are_rejected() {
        use PolyFamily::*;
        assert_eq!(
            product_to_sum::<f64>(Tns, 2, T, 1),
            Err(UnsupportedProduct(Tns, T))
        );
    }

    #[test]
    fn single_precision_evaluation() {
        assert!((eval_t(5, 0.3f32) - 0.99888).abs() < 1e-5);
        assert!((eval_tns(4, 0.5f32) + 1.0).abs() < 1e-6);
    }

    fn family() -> impl Strategy<Value = PolyFamily> {
        prop_oneof![Just(PolyFamily::T), Just(PolyFamily::U)]
    }

    proptest! {
        #[test]
        fn recurrences_hold(n in 1usize..40, u in -1.0f64..=1.0) {
            let t = eval_t(n + 1, u) - (2.0 * u * eval_t(n, u) - eval_t(n - 1, u));
            let w = eval_u(n + 1, u) - (2.0 * u * eval_u(n, u) - eval_u(n - 1, u));
            prop_assert!(t.abs() <= 1e-12 && w.abs() <= 1e-12);
            prop_assert!(eval_t(n, u).abs() <= 1.0 + 1e-12);
        }

        #[test]
        fn tns_reconstructs_t(n in 0usize..=40, u in -0.99f64..=0.99) {
            let parity = if n % 2 == 0 { 1.0 } else { u };
            let lhs = 2.0 * (1.0 - u * u) * eval_tns(n, u) + parity;
            prop_assert!((lhs - eval_t(n, u)).abs() <= 1e-10);
        }

        #[test]
        fn product_to_sum_is_pointwise_exact(
            fa in family(), a in 0usize..=20, fb in family(), b in 0usize..=20,
            u in prop_oneof![Just(-1.0f64), Just(1.0f64), -1.0f64..=1.0],
        ) {
            let e = product_to_sum::<f64>(fa, a, fb, b).unwrap();
            prop_assert!(e.len() <= 2);
            prop_assert!(e.terms().iter().all(|t| t.coeff != 0.0));
            let want = eval(fa, a, u) * eval(fb, b, u);
            prop_assert!((e.eval(u) - want).abs() <= 1e-12 * want.abs().max(1.0));
        }
    }
}
