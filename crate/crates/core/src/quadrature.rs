//! Gauss-Legendre rules on `[-1, 1]` and tensor-product integration on the
//! reference square.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadRule1D<S> {
    pub nodes: Vec<S>,
    pub weights: Vec<S>,
}

impl<S: Scalar> QuadRule1D<S> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, mut f: impl FnMut(S) -> S) -> S {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// `n`-point Gauss-Legendre rule, exact through degree `2n - 1`.
///
/// Nodes are the roots of `P_n`, found by Newton iteration from the
/// Chebyshev-like initial guesses in double precision and mirrored so the
/// rule is exactly symmetric.
///
/// # Panics
///
/// Panics if `n == 0`.
pub fn gauss_legendre<S: Scalar>(n: usize) -> QuadRule1D<S> {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one point");
    let mut nodes = vec![0.0f64; n];
    let mut weights = vec![0.0f64; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        // i-th largest root
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        if n % 2 == 1 && i == half - 1 {
            x = 0.0;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    QuadRule1D {
        nodes: nodes.into_iter().map(S::lit).collect(),
        weights: weights.into_iter().map(S::lit).collect(),
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Tensor product of two one-dimensional rules.
#[derive(Clone, Debug)]
pub struct TensorRule<S> {
    pub u: QuadRule1D<S>,
    pub v: QuadRule1D<S>,
}

impl<S: Scalar> TensorRule<S> {
    pub fn gauss(nu: usize, nv: usize) -> Self {
        TensorRule {
            u: gauss_legendre(nu),
            v: gauss_legendre(nv),
        }
    }

    pub fn point_count(&self) -> usize {
        self.u.len() * self.v.len()
    }

    /// `sum_ij w_i w_j f(u_i, v_j)`; a non-finite sample is reported with its location.
    pub fn integrate(&self, mut f: impl FnMut(S, S) -> S) -> Result<S> {
        let mut acc = S::zero();
        for (&u, &wu) in self.u.nodes.iter().zip(&self.u.weights) {
            for (&v, &wv) in self.v.nodes.iter().zip(&self.v.weights) {
                let fx = f(u, v);
                if !fx.is_finite() {
                    return Err(Error::Integration {
                        u: u.as_f64(),
                        v: v.as_f64(),
                    });
                }
                acc += wu * wv * fx;
            }
        }
        Ok(acc)
    }
}

/// Integrates `f` over `[-1, 1]^2` with `nu x nv` Gauss points.
pub fn integrate2d<S: Scalar>(f: impl FnMut(S, S) -> S, nu: usize, nv: usize) -> Result<S> {
    TensorRule::gauss(nu, nv).integrate(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn small_rules() {
        let r1 = gauss_legendre::<f64>(1);
        assert_eq!(r1.nodes, vec![0.0]);
        assert_eq!(r1.weights, vec![2.0]);
        let r2 = gauss_legendre::<f64>(2);
        let a = 1.0 / 3f64.sqrt();
        assert_abs_diff_eq!(r2.nodes[0], -a, epsilon = 1e-15);
        assert_abs_diff_eq!(r2.nodes[1], a, epsilon = 1e-15);
        assert_abs_diff_eq!(r2.weights[0], 1.0, epsilon = 1e-15);
        let r3 = gauss_legendre::<f64>(3);
        assert_abs_diff_eq!(r3.integrate(|x| x.powi(4)), 0.4, epsilon = 1e-14);
    }

    #[test]
    fn rule_invariants() {
        for n in 1..=64 {
            let r = gauss_legendre::<f64>(n);
            let total: f64 = r.weights.iter().sum();
            assert_abs_diff_eq!(total, 2.0, epsilon = 1e-13);
            assert!(r.weights.iter().all(|&w| w > 0.0));
            assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
            for i in 0..n {
                assert_eq!(r.nodes[i], -r.nodes[n - 1 - i]);
            }
            assert!(r.nodes.iter().all(|&x| x > -1.0 && x < 1.0));
        }
    }

    #[test]
    fn two_dimensional_examples() {
        assert_abs_diff_eq!(integrate2d(|_, _| 1.0, 3, 5).unwrap(), 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(
            integrate2d(|u: f64, v| u * u * v * v, 2, 2).unwrap(),
            4.0 / 9.0,
            epsilon = 1e-15
        );
        let want = (std::f64::consts::E - 1.0 / std::f64::consts::E).powi(2);
        assert_abs_diff_eq!(
            integrate2d(|u: f64, v| (u + v).exp(), 12, 12).unwrap(),
            want,
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(want, 5.52439138, epsilon = 1e-8);
    }

    #[test]
    fn nan_integrand_is_reported() {
        let err = integrate2d(|u: f64, _| if u > 0.0 { f64::NAN } else { 1.0 }, 2, 2).unwrap_err();
        assert!(matches!(err, Error::Integration { u, .. } if u > 0.0));
    }

    #[test]
    fn single_precision_rule() {
        let r = gauss_legendre::<f32>(5);
        let s: f32 = r.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn exact_for_degree_2n_minus_1(n in 1usize..=20, coeffs in prop::collection::vec(-1.0f64..1.0, 40)) {
            let deg = 2 * n - 1;
            let c = &coeffs[..=deg];
            let rule = gauss_legendre::<f64>(n);
            let got = rule.integrate(|x| c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck));
            // exact: sum over even k of 2 c_k / (k + 1)
            let want: f64 = c.iter().enumerate().filter(|(k, _)| k % 2 == 0).map(|(k, &ck)| 2.0 * ck / (k as f64 + 1.0)).sum();
            prop_assert!((got - want).abs() <= 1e-12);
        }

        #[test]
        fn transposed_integrand_symmetry(n in 1usize..12, a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let f = |u: f64, v: f64| (a * u + b * v * v).exp() * (1.0 + u * v);
            let lhs = integrate2d(f, n, n).unwrap();
            let rhs = integrate2d(|u, v| f(v, u), n, n).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }
    }
}
