//! Scalar abstraction and the special functions the closed forms need.

use nalgebra::linalg::SymmetricEigen;
use nalgebra::{DMatrix, DVector, RealField};
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar type the library is generic over.
///
/// Implemented for `f32` and `f64`. Beyond the field operations from
/// [`RealField`], the trait supplies the scaled complementary error function
/// and IEEE infinity handling (an infinite critical photon number encodes a
/// decoupled cavity, `g = 0`).
pub trait Scalar: RealField + FromPrimitive + ToPrimitive + Copy {
    /// Scaled complementary error function `erfcx(x) = exp(x^2) erfc(x)`,
    /// finite for all `x >= 0` where the bare product would overflow.
    fn erfcx(self) -> Self;

    fn infinity() -> Self;

    fn is_finite_val(self) -> bool;

    /// Eigendecomposition of a Hermitian matrix, returning (values,
    /// vectors). The f32 lane promotes to f64 internally: the tridiagonal
    /// iteration is not reliable at single precision for the near-degenerate
    /// spectra that density matrices produce.
    fn hermitian_eigen(m: &DMatrix<Complex<Self>>) -> (DVector<Self>, DMatrix<Complex<Self>>);
}

impl Scalar for f64 {
    fn erfcx(self) -> f64 {
        erfcx_f64(self)
    }

    fn infinity() -> f64 {
        f64::INFINITY
    }

    fn is_finite_val(self) -> bool {
        self.is_finite()
    }

    fn hermitian_eigen(m: &DMatrix<Complex<f64>>) -> (DVector<f64>, DMatrix<Complex<f64>>) {
        let eig = SymmetricEigen::new(m.clone());
        (eig.eigenvalues, eig.eigenvectors)
    }
}

impl Scalar for f32 {
    fn erfcx(self) -> f32 {
        erfcx_f64(f64::from(self)) as f32
    }

    fn infinity() -> f32 {
        f32::INFINITY
    }

    fn is_finite_val(self) -> bool {
        self.is_finite()
    }

    fn hermitian_eigen(m: &DMatrix<Complex<f32>>) -> (DVector<f32>, DMatrix<Complex<f32>>) {
        let wide = m.map(|z| Complex::new(f64::from(z.re), f64::from(z.im)));
        let eig = SymmetricEigen::new(wide);
        (
            eig.eigenvalues.map(|v| v as f32),
            eig.eigenvectors
                .map(|z| Complex::new(z.re as f32, z.im as f32)),
        )
    }
}

/// Convert an `f64` constant into the working scalar type.
pub(crate) fn r<R: Scalar>(x: f64) -> R {
    R::from_f64(x).expect("f64 constant must be representable in the scalar type")
}

/// Lossy view of a scalar as `f64`, for diagnostics.
pub(crate) fn as_f64<R: Scalar>(x: R) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// `erfcx(x) = exp(x^2) erfc(x)` for `x >= 0`.
///
/// Below the crossover the direct product is exact to rounding; above it the
/// asymptotic series `1/(x sqrt(pi)) * sum_k (-1)^k (2k-1)!!/(2x^2)^k` is
/// truncated at its smallest term (relative error below 1e-11 at the
/// crossover, improving for larger arguments).
fn erfcx_f64(x: f64) -> f64 {
    assert!(x >= 0.0, "erfcx implemented for nonnegative arguments");
    if x.is_infinite() {
        return 0.0;
    }
    if x < 6.0 {
        return (x * x).exp() * libm::erfc(x);
    }
    let inv2x2 = 1.0 / (2.0 * x * x);
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1u32;
    loop {
        let next = term * (2.0 * f64::from(k) - 1.0) * inv2x2;
        if next >= term || next < 1e-18 {
            break;
        }
        term = next;
        sum += if k % 2 == 0 { term } else { -term };
        k += 1;
    }
    sum / (x * core::f64::consts::PI.sqrt())
}

/// Cumulative table of `ln(n!)` for `n = 0..=n_max`.
pub(crate) fn ln_factorials(n_max: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(n_max + 1);
    let mut acc = 0.0f64;
    table.push(0.0);
    for n in 1..=n_max {
        acc += (n as f64).ln();
        table.push(acc);
    }
    table
}

/// Pairwise (cascade) summation; bounds rounding error growth to O(log n).
pub(crate) fn pairwise_sum<R: Scalar>(terms: &[R]) -> R {
    match terms.len() {
        0 => R::zero(),
        1 => terms[0],
        2 => terms[0] + terms[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&terms[..mid]) + pairwise_sum(&terms[mid..])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Independent oracle: erfc(x) = 2/sqrt(pi) * int_x^inf exp(-t^2) dt by
    // Simpson quadrature on [x, x+12] (the remainder beyond is < 1e-60).
    fn erfc_quadrature(x: f64) -> f64 {
        let steps = 20000;
        let upper = x + 12.0;
        let h = (upper - x) / steps as f64;
        let f = |t: f64| (-t * t).exp();
        let mut acc = f(x) + f(upper);
        for i in 1..steps {
            let t = x + h * i as f64;
            acc += if i % 2 == 1 { 4.0 * f(t) } else { 2.0 * f(t) };
        }
        acc * h / 3.0 * 2.0 / core::f64::consts::PI.sqrt()
    }

    #[test]
    fn erfcx_matches_quadrature() {
        for &x in &[0.0f64, 0.01, 0.1, 0.4243, 0.7, 1.0, 2.0, 4.0, 5.9] {
            let expected = (x * x).exp() * erfc_quadrature(x);
            assert_relative_eq!(erfcx_f64(x), expected, max_relative = 1e-9);
        }
    }

    #[test]
    fn erfcx_asymptotic_branch_is_continuous() {
        // Compare the series branch against exp(x^2)*erfc(x) just below the
        // crossover, where the direct product is still accurate.
        let left = (5.999f64 * 5.999).exp() * libm::erfc(5.999);
        let right = erfcx_f64(6.001);
        assert_relative_eq!(left, right, max_relative = 1e-3);
        // and against the quadrature oracle at a large argument
        let x = 8.0f64;
        let expected = (x * x).exp() * erfc_quadrature(x);
        assert_relative_eq!(erfcx_f64(x), expected, max_relative = 1e-9);
    }

    #[test]
    fn erfcx_limits() {
        assert_relative_eq!(erfcx_f64(0.0), 1.0);
        assert_eq!(erfcx_f64(f64::INFINITY), 0.0);
        // large-argument leading order 1/(x sqrt(pi))
        let x = 50.0;
        assert_relative_eq!(
            erfcx_f64(x),
            1.0 / (x * core::f64::consts::PI.sqrt()),
            max_relative = 1e-3
        );
    }

    #[test]
    fn ln_factorial_table() {
        let t = ln_factorials(10);
        assert_eq!(t[0], 0.0);
        assert_relative_eq!(t[5], 120f64.ln(), max_relative = 1e-14);
        assert_relative_eq!(t[10], 3628800f64.ln(), max_relative = 1e-14);
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let xs: Vec<f64> = (0..1001).map(|i| (i as f64).sin()).collect();
        let naive: f64 = xs.iter().sum();
        assert_relative_eq!(pairwise_sum(&xs), naive, max_relative = 1e-12);
    }

    #[test]
    fn f32_lane_delegates() {
        assert_relative_eq!(1.0f32.erfcx(), erfcx_f64(1.0) as f32);
        assert!(!<f32 as Scalar>::infinity().is_finite_val());
    }
}
