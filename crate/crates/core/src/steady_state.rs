//! Closed-form equilibrium results: the interaction kernel, the equilibrium
//! cavity state, conditional fidelities at finite photon number and in the
//! thermodynamic limit, critical-coupling thresholds, the final field
//! intensity, and the phase-scrambling heuristic.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::hilbert::{coherent_amplitudes, coherent_state, DensityMatrix, HilbertDims};
use crate::scalar::{as_f64, ln_factorials, pairwise_sum, r, Scalar};

/// Parameters of the equilibrium formulas.
///
/// `m` is the critical photon number `(gamma/g)^2 / 2`; `m = +inf` encodes a
/// decoupled cavity (`g = 0`). `n_bar0 = +inf` selects the thermodynamic
/// forms where a formula supports them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyStateInputs<R: Scalar> {
    pub x: R,
    pub n_bar0: R,
    pub m: R,
    pub n_max: usize,
}

impl<R: Scalar> SteadyStateInputs<R> {
    pub fn new(x: R, n_bar0: R, m: R, n_max: usize) -> Result<Self> {
        if x < R::zero() || x > R::one() {
            return Err(Error::Normalization {
                context: format!("bright-state probability x = {} outside [0, 1]", as_f64(x)),
            });
        }
        if !(n_bar0 >= R::zero()) {
            return Err(Error::Normalization {
                context: "initial photon number must be nonnegative".into(),
            });
        }
        if !(m > R::zero()) {
            return Err(Error::Normalization {
                context: format!("critical photon number m = {} must be positive", as_f64(m)),
            });
        }
        Ok(Self {
            x,
            n_bar0,
            m,
            n_max,
        })
    }
}

/// Interaction kernel `K(l, l') = (1 + (l+l')/2 + (l-l')^2/(8m))^{-1}`.
///
/// Symmetric in `(l, l')` and confined to `(0, 1]`; `m = +inf` drops the
/// phase-difference penalty.
pub fn kernel_k<R: Scalar>(l: usize, lp: usize, m: R) -> R {
    let lf = r::<R>(l as f64);
    let lpf = r::<R>(lp as f64);
    let diff = lf - lpf;
    let half = r::<R>(0.5);
    let penalty = if m.is_finite_val() {
        diff * diff / (r::<R>(8.0) * m)
    } else {
        R::zero()
    };
    (R::one() + (lf + lpf) * half + penalty).recip()
}

/// Equilibrium cavity state conditioned on the emitter starting bright:
/// `rho_c = e^{-|a|^2} |0><0| + |a|^2 sum_{l,l'} K_{l,l'} <l'|a><a|l> |l'><l|`.
pub fn rho_c<R: Scalar>(alpha: Complex<R>, m: R, n_max: usize) -> Result<DensityMatrix<R>> {
    if !(m > R::zero()) {
        return Err(Error::Normalization {
            context: "critical photon number must be positive".into(),
        });
    }
    let n = n_max + 1;
    let n_bar = alpha.norm_sqr();
    let amps = coherent_amplitudes(alpha, n_max);
    let mut mat = DMatrix::from_element(n, n, Complex::new(R::zero(), R::zero()));
    for l in 0..n {
        for lp in 0..n {
            let k = kernel_k(l, lp, m);
            // <l'|alpha><alpha|l> = c_{l'} conj(c_l)
            mat[(lp, l)] = amps[lp] * amps[l].conj() * Complex::new(n_bar * k, R::zero());
        }
    }
    mat[(0, 0)] += Complex::new((-n_bar).exp(), R::zero());

    let trace = mat.trace().re;
    let deficit = (R::one() - trace).abs();
    if deficit > r::<R>(1e-5) {
        return Err(Error::Truncation {
            context: format!(
                "equilibrium cavity state at n_bar0 = {:.3}, cutoff {n_max}",
                as_f64(n_bar)
            ),
            deficit: as_f64(deficit),
        });
    }
    // compensate the truncation remainder so the state passes the trace gate
    let correction = Complex::new(R::one() / trace, R::zero());
    DensityMatrix::new(mat * correction, HilbertDims::new(&[n])?)
}

/// Equilibrium cavity state `(1-x) |alpha><alpha| + x rho_c`.
pub fn final_cavity_state<R: Scalar>(
    inputs: &SteadyStateInputs<R>,
    alpha: Complex<R>,
) -> Result<DensityMatrix<R>> {
    if (alpha.norm_sqr() - inputs.n_bar0).abs() > r::<R>(1e-12) {
        return Err(Error::DimensionMismatch {
            context: format!(
                "|alpha|^2 = {:.6e} inconsistent with n_bar0 = {:.6e}",
                as_f64(alpha.norm_sqr()),
                as_f64(inputs.n_bar0)
            ),
        });
    }
    let interacting = rho_c(alpha, inputs.m, inputs.n_max)?;
    let coherent = coherent_state(alpha, inputs.n_max)?.projector()?;
    let x = Complex::new(inputs.x, R::zero());
    let one_minus_x = Complex::new(R::one() - inputs.x, R::zero());
    DensityMatrix::new(
        coherent.matrix() * one_minus_x + interacting.matrix() * x,
        interacting.dims().clone(),
    )
}

/// Conditional fidelity at finite photon number,
/// `f = e^{-2 n} (1 + n sum_{l,l'} K_{l,l'} n^{l+l'} / (l! l'!))`,
/// with every Poisson weight evaluated in log space and the double sum
/// accumulated pairwise.
pub fn conditional_fidelity_sum<R: Scalar>(n_bar0: R, m: R, n_max: usize) -> R {
    let n_bar = as_f64(n_bar0);
    assert!(n_bar >= 0.0, "photon number must be nonnegative");
    if n_bar == 0.0 {
        return R::one();
    }
    let lnfact = ln_factorials(n_max);
    let ln_nbar = n_bar.ln();
    let mut terms = Vec::with_capacity((n_max + 1) * (n_max + 1));
    for l in 0..=n_max {
        for lp in 0..=n_max {
            let log_w = (l + lp) as f64 * ln_nbar - lnfact[l] - lnfact[lp] - 2.0 * n_bar;
            terms.push(kernel_k::<R>(l, lp, m) * r::<R>(log_w.exp()));
        }
    }
    let double_sum = pairwise_sum(&terms);
    r::<R>((-2.0 * n_bar).exp()) + n_bar0 * double_sum
}

/// Conditional fidelity in the thermodynamic limit,
/// `f = sqrt(2 pi m) e^{2m} erfc(sqrt(2m))`, evaluated through the scaled
/// complementary error function so large `m` neither overflows nor
/// underflows.
pub fn conditional_fidelity_thermo<R: Scalar>(m: R) -> R {
    assert!(m > R::zero(), "critical photon number must be positive");
    if !m.is_finite_val() {
        return R::one();
    }
    let two_m = m + m;
    (R::two_pi() * m).sqrt() * two_m.sqrt().erfcx()
}

/// Fidelity between initial and equilibrium cavity states,
/// `F = 1 - x (1 - f)`; the sentinel `n_bar0 = +inf` selects the
/// thermodynamic conditional fidelity.
pub fn fidelity_f<R: Scalar>(inputs: &SteadyStateInputs<R>) -> R {
    let f = if inputs.n_bar0.is_finite_val() {
        conditional_fidelity_sum(inputs.n_bar0, inputs.m, inputs.n_max)
    } else {
        conditional_fidelity_thermo(inputs.m)
    };
    R::one() - inputs.x * (R::one() - f)
}

/// Coupling below which the finite-photon-number fidelity departs from the
/// thermodynamic form: `m_min = 1 / (8 pi^2 n_bar0)`.
pub fn m_min<R: Scalar>(n_bar0: R) -> R {
    assert!(n_bar0 > R::zero(), "photon number must be positive");
    (r::<R>(8.0) * R::pi() * R::pi() * n_bar0).recip()
}

/// Critical photon number at which the thermodynamic conditional fidelity
/// crosses one half, found by bisection on `[0.01, 1]` to 1e-6.
pub fn m_half<R: Scalar>() -> Result<R> {
    let half = r::<R>(0.5);
    let mut lo = r::<R>(0.01);
    let mut hi = R::one();
    let f_lo = conditional_fidelity_thermo(lo) - half;
    let f_hi = conditional_fidelity_thermo(hi) - half;
    if (f_lo > R::zero()) == (f_hi > R::zero()) {
        return Err(Error::RootBracket {
            lo: as_f64(lo),
            hi: as_f64(hi),
        });
    }
    let tol = r::<R>(1e-6);
    let mut f_hi_sign = f_hi > R::zero();
    while hi - lo > tol {
        let mid = (lo + hi) * half;
        let f_mid = conditional_fidelity_thermo(mid) - half;
        if (f_mid > R::zero()) == f_hi_sign {
            hi = mid;
        } else {
            lo = mid;
        }
        f_hi_sign = conditional_fidelity_thermo(hi) - half > R::zero();
    }
    Ok((lo + hi) * half)
}

/// Relative accumulated phase between Fock states `|n>` and `|n + dn>` over
/// one emitter lifetime: `(g / 2 gamma) (sqrt(n + dn) - sqrt(n))`.
pub fn phase_spread<R: Scalar>(n: R, dn: R, g_over_gamma: R) -> R {
    assert!(
        n >= R::zero() && n + dn >= R::zero(),
        "photon numbers must be nonnegative"
    );
    assert!(g_over_gamma > R::zero(), "coupling ratio must be positive");
    g_over_gamma * r::<R>(0.5) * ((n + dn).sqrt() - n.sqrt())
}

/// Phase spread across one standard deviation of the coherent photon
/// distribution, `|dphi(n_bar0, sqrt(n_bar0))|`, which approaches
/// `(g / gamma) / 4` for large `n_bar0`.
pub fn phase_spread_coherent<R: Scalar>(n_bar0: R, g_over_gamma: R) -> R {
    phase_spread(n_bar0, n_bar0.sqrt(), g_over_gamma).abs()
}

/// Equilibrium intensity `<a^dag a> = n_bar0 - x (1 - e^{-n_bar0})`.
pub fn final_intensity<R: Scalar>(x: R, n_bar0: R) -> R {
    n_bar0 - x * (R::one() - (-n_bar0).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{number_operator, truncation_dim};
    use approx::assert_relative_eq;

    fn c64(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn kernel_values() {
        assert_relative_eq!(kernel_k(0, 0, 0.5), 1.0);
        assert_relative_eq!(kernel_k(0, 0, 37.0), 1.0);
        for l in 0..6 {
            assert_relative_eq!(kernel_k(l, l, 0.17), 1.0 / (1.0 + l as f64));
        }
        assert_relative_eq!(kernel_k(0, 1, 0.5), 4.0 / 7.0);
        assert_relative_eq!(kernel_k(3, 7, 0.25), kernel_k(7, 3, 0.25));
        // infinite m drops the phase penalty
        assert_relative_eq!(kernel_k(0, 4, f64::INFINITY), 1.0 / 3.0);
    }

    #[test]
    fn kernel_decays_with_fock_distance() {
        // along fixed l + l', K is monotone in (l - l')^2
        let m = 0.8;
        let values: Vec<f64> = (0..=4).map(|l| kernel_k(4 + l, 4 - l, m)).collect();
        for pair in values.windows(2) {
            assert!(pair[1] < pair[0]);
        }
    }

    #[test]
    fn rho_c_vacuum_input() {
        let state = rho_c(c64(0.0, 0.0), 0.7, 8).unwrap();
        assert_relative_eq!(state.matrix()[(0, 0)].re, 1.0, epsilon = 1e-14);
        assert_relative_eq!(state.purity(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn rho_c_trace_identity() {
        // sum_l K_{l,l} |<l|a>|^2 |a|^2 + e^{-|a|^2} = 1 term by term
        let n_bar: f64 = 5.0;
        let n_max = truncation_dim(n_bar, 1e-12);
        let lnfact = ln_factorials(n_max);
        let direct: f64 = (-n_bar).exp()
            + n_bar
                * (0..=n_max)
                    .map(|l| {
                        let poisson = (-n_bar + l as f64 * n_bar.ln() - lnfact[l]).exp();
                        poisson / (1.0 + l as f64)
                    })
                    .sum::<f64>();
        assert_relative_eq!(direct, 1.0, epsilon = 1e-10);

        let state = rho_c(c64(n_bar.sqrt(), 0.0), 0.5, n_max).unwrap();
        assert_relative_eq!(state.trace(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn rho_c_diagonal_matches_fidelity_sum() {
        let n_bar: f64 = 4.0;
        let m = 0.7;
        let n_max = truncation_dim(n_bar, 1e-12);
        let alpha = c64(n_bar.sqrt(), 0.0);
        let state = rho_c(alpha, m, n_max).unwrap();
        let ket = coherent_state(alpha, n_max).unwrap();
        let overlap = (ket.amplitudes().adjoint() * state.matrix() * ket.amplitudes())[(0, 0)].re;
        let f = conditional_fidelity_sum(n_bar, m, n_max);
        assert_relative_eq!(overlap, f, epsilon = 1e-8);
    }

    #[test]
    fn final_state_limits() {
        let n_bar: f64 = 3.0;
        let n_max = truncation_dim(n_bar, 1e-12);
        let alpha = c64(n_bar.sqrt(), 0.0);
        let coherent = coherent_state(alpha, n_max).unwrap().projector().unwrap();

        let dark = SteadyStateInputs::new(0.0, n_bar, 0.5, n_max).unwrap();
        let state = final_cavity_state(&dark, alpha).unwrap();
        assert!((state.matrix() - coherent.matrix()).norm() < 1e-10);

        let bright = SteadyStateInputs::new(1.0, n_bar, 0.5, n_max).unwrap();
        let state = final_cavity_state(&bright, alpha).unwrap();
        let rc = rho_c(alpha, 0.5, n_max).unwrap();
        assert!((state.matrix() - rc.matrix()).norm() < 1e-10);
    }

    #[test]
    fn fidelity_sum_brute_force_oracle() {
        // n_bar = 1 keeps every weight within range of a direct product sum
        let n_bar: f64 = 1.0;
        let m = 1.0;
        let n_max = 60;
        let mut fact = vec![1.0f64];
        for k in 1..=n_max {
            let prev = fact[k - 1];
            fact.push(prev * k as f64);
        }
        let mut acc = 0.0;
        for l in 0..=n_max {
            for lp in 0..=n_max {
                acc += kernel_k(l, lp, m) * n_bar.powi((l + lp) as i32) / (fact[l] * fact[lp]);
            }
        }
        let expected = (-2.0 * n_bar).exp() * (1.0 + n_bar * acc);
        assert_relative_eq!(expected, 0.6619227801583785, epsilon = 1e-12);
        assert_relative_eq!(
            conditional_fidelity_sum(n_bar, m, n_max),
            expected,
            epsilon = 1e-12
        );
    }

    #[test]
    fn fidelity_sum_empty_cavity() {
        assert_relative_eq!(conditional_fidelity_sum(0.0, 0.3, 10), 1.0);
    }

    #[test]
    fn fidelity_sum_approaches_thermo_at_half_crossing() {
        // near m_half the finite sum at n_bar0 = 10 tracks the closed form
        let n_max = truncation_dim(10.0, 1e-12);
        let f_sum: f64 = conditional_fidelity_sum(10.0, 0.09, n_max);
        let f_th: f64 = conditional_fidelity_thermo(0.09);
        assert!((f_sum - f_th).abs() < 0.02, "gap {}", (f_sum - f_th).abs());
    }

    #[test]
    fn thermo_fidelity_benchmarks() {
        assert!((conditional_fidelity_thermo(0.09f64) - 0.5).abs() < 0.01);
        assert!(conditional_fidelity_thermo(1e-5f64) < 0.01);
        assert_relative_eq!(
            conditional_fidelity_thermo(100.0f64),
            1.0 - 1.0 / 400.0,
            epsilon = 1e-4
        );
        assert_relative_eq!(conditional_fidelity_thermo(f64::INFINITY), 1.0);
    }

    #[test]
    fn fidelity_f_limits() {
        let n_max = truncation_dim(5.0, 1e-12);
        let no_bright = SteadyStateInputs::new(0.0, 5.0, 0.5, n_max).unwrap();
        assert_relative_eq!(fidelity_f(&no_bright), 1.0);

        // strong coupling, thermodynamic photon number: F -> 0
        let strong = SteadyStateInputs::new(1.0, f64::INFINITY, 1e-9, 1).unwrap();
        assert!(fidelity_f(&strong) < 1e-3);
    }

    #[test]
    fn fidelity_f_equals_coherent_overlap() {
        let n_bar: f64 = 5.0;
        let n_max = truncation_dim(n_bar, 1e-12);
        let alpha = c64(n_bar.sqrt(), 0.0);
        let inputs = SteadyStateInputs::new(0.6, n_bar, 0.5, n_max).unwrap();
        let state = final_cavity_state(&inputs, alpha).unwrap();
        let ket = coherent_state(alpha, n_max).unwrap();
        let overlap = (ket.amplitudes().adjoint() * state.matrix() * ket.amplitudes())[(0, 0)].re;
        assert_relative_eq!(overlap, fidelity_f(&inputs), epsilon = 1e-8);
    }

    #[test]
    fn m_min_value() {
        assert_relative_eq!(m_min(10.0), 1.0 / (80.0 * std::f64::consts::PI.powi(2)));
        assert_relative_eq!(m_min(10.0), 1.2665e-3, epsilon = 1e-7);
    }

    #[test]
    fn m_half_bracket_and_root() {
        let mh: f64 = m_half().unwrap();
        assert!((0.085..=0.095).contains(&mh), "m_half = {mh}");
        assert!((conditional_fidelity_thermo(mh) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn phase_spread_values() {
        assert_relative_eq!(phase_spread(7.0, 0.0, 3.0), 0.0);
        assert_relative_eq!(phase_spread(0.0, 1.0, 2.0), 1.0);
        let dphi: f64 = phase_spread_coherent(1e4, 1.0);
        assert!((dphi - 0.25).abs() / 0.25 < 0.01, "dphi = {dphi}");
    }

    #[test]
    fn intensity_values() {
        assert_relative_eq!(final_intensity(0.0, 7.3), 7.3);
        assert_relative_eq!(final_intensity(1.0, 100.0), 99.0, epsilon = 1e-10);
    }

    #[test]
    fn intensity_matches_number_expectation() {
        let n_bar: f64 = 5.0;
        let x = 0.7;
        let n_max = truncation_dim(n_bar, 1e-12);
        let alpha = c64(n_bar.sqrt(), 0.0);
        let inputs = SteadyStateInputs::new(x, n_bar, 0.5, n_max).unwrap();
        let state = final_cavity_state(&inputs, alpha).unwrap();
        let measured = state.expectation(&number_operator(n_max)).unwrap().re;
        assert_relative_eq!(measured, final_intensity(x, n_bar), epsilon = 1e-6);
    }

    #[test]
    fn fidelity_monotone_in_coupling() {
        for &n_bar in &[1.0, 5.0, 10.0] {
            let n_max = truncation_dim(n_bar, 1e-12);
            let mut prev = 0.0;
            let mut m = 0.01;
            while m <= 100.0 {
                let f = conditional_fidelity_sum(n_bar, m, n_max);
                assert!(f > 0.0 && f < 1.0, "f out of (0,1) at n_bar {n_bar}, m {m}");
                assert!(f > prev, "not monotone at n_bar {n_bar}, m {m}");
                prev = f;
                m *= 3.0;
            }
        }
    }

    #[test]
    fn rho_c_approaches_weak_coupling_ceiling() {
        // As m grows, rho_c approaches the zero-coupling equilibrium, whose
        // overlap with |alpha> has the closed form
        //   f(n, inf) = 1 - 1/x + e^{-x} (1 + x) / x,  x = 2 n,
        // (the single absorbed-and-reemitted photon caps the overlap at
        // about 1 - 1/(2 n); it does not tend to one at fixed n).
        let n_bar: f64 = 5.0;
        let n_max = truncation_dim(n_bar, 1e-12);
        let alpha = c64(n_bar.sqrt(), 0.0);
        let ket = coherent_state(alpha, n_max).unwrap();
        let overlap_at = |m: f64| {
            let rc = rho_c(alpha, m, n_max).unwrap();
            (ket.amplitudes().adjoint() * rc.matrix() * ket.amplitudes())[(0, 0)].re
        };
        let x = 2.0 * n_bar;
        let ceiling = 1.0 - 1.0 / x + (-x).exp() * (1.0 + x) / x;
        let at_100 = overlap_at(100.0);
        assert!(
            (at_100 - ceiling).abs() < 5e-3,
            "overlap {at_100} vs ceiling {ceiling}"
        );
        assert!(overlap_at(0.01) < overlap_at(1.0) && overlap_at(1.0) < at_100);
    }

    #[test]
    fn rho_c_off_diagonal_decay() {
        let n_bar: f64 = 4.0;
        let n_max = truncation_dim(n_bar, 1e-12);
        let rc = rho_c(c64(n_bar.sqrt(), 0.0), 0.3, n_max).unwrap();
        // |<l'|rho_c|l>| decreases with |l - l'| at fixed l + l'
        let center = 4;
        let mags: Vec<f64> = (0..=3)
            .map(|k| rc.matrix()[(center - k, center + k)].norm())
            .collect();
        for pair in mags.windows(2) {
            assert!(pair[1] < pair[0]);
        }
    }

    #[test]
    fn inputs_validation() {
        assert!(SteadyStateInputs::new(-0.1, 5.0, 0.5, 10).is_err());
        assert!(SteadyStateInputs::new(0.5, 5.0, 0.0, 10).is_err());
        assert!(SteadyStateInputs::new(0.5, 5.0, f64::INFINITY, 10).is_ok());
    }
}
